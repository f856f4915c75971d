import init, { run_experiment_demo, svm_regions } from "./pkg/fuseid_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];
const $ = (id) => document.getElementById(id);

function bindSlider(id) {
  const update = () => { $(id + "-v").textContent = $(id).value; };
  $(id).addEventListener("input", update);
  update();
}

function drawLoss(loss) {
  const cv = $("loss"), ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (loss.length === 0) return;
  const max = Math.max(...loss), pad = 10;
  ctx.strokeStyle = "#333";
  ctx.beginPath();
  loss.forEach((l, i) => {
    const x = pad + (i / Math.max(1, loss.length - 1)) * (cv.width - 2 * pad);
    const y = cv.height - pad - (l / max) * (cv.height - 2 * pad);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillText(`loss ${loss[0].toFixed(3)} to ${loss[loss.length - 1].toFixed(4)}`, pad, 12);
}

function drawMatrix(cond) {
  const n = cond.confusion.length, size = 160, cell = size / n;
  const wrap = document.createElement("div");
  const cv = document.createElement("canvas");
  cv.width = cv.height = size;
  const ctx = cv.getContext("2d");
  cond.confusion.forEach((row, i) => {
    const total = row.reduce((a, b) => a + b, 0) || 1;
    row.forEach((v, j) => {
      const shade = Math.round(255 * (1 - v / total));
      ctx.fillStyle = `rgb(${shade},${shade},255)`;
      ctx.fillRect(j * cell, i * cell, cell, cell);
    });
  });
  const caption = document.createElement("div");
  caption.textContent = `${cond.condition}: ${(100 * cond.top1).toFixed(1)}%`;
  wrap.append(caption, cv);
  return wrap;
}

function runExperiment() {
  $("status").textContent = "training...";
  $("status").className = "";
  // Let the status text paint before the synchronous run.
  setTimeout(() => {
    const cfg = {
      voice_noise: +$("vn").value,
      face_noise: +$("fn").value,
      identities: +$("ids").value,
      epochs: +$("ep").value,
      seed: +$("seed").value,
    };
    const t0 = performance.now();
    try {
      const out = JSON.parse(run_experiment_demo(JSON.stringify(cfg)));
      $("summary").textContent = out.summary;
      drawLoss(out.loss);
      $("matrices").replaceChildren(...out.conditions.map(drawMatrix));
      $("status").textContent = `done in ${((performance.now() - t0) / 1000).toFixed(1)}s`;
    } catch (e) {
      $("status").textContent = e.message;
      $("status").className = "error";
    }
  }, 10);
}

const points = [];
let currentClass = 0;

function toUnit(ev) {
  const r = $("board").getBoundingClientRect();
  return { x: 2 * (ev.clientX - r.left) / r.width - 1, y: 1 - 2 * (ev.clientY - r.top) / r.height };
}

function drawBoard(regions) {
  const cv = $("board"), ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (regions) {
    const n = regions.grid, w = cv.width / n, h = cv.height / n;
    ctx.globalAlpha = 0.25;
    regions.cells.forEach((label, k) => {
      const r = Math.floor(k / n), c = k % n;
      ctx.fillStyle = COLORS[label % COLORS.length];
      ctx.fillRect(c * w, cv.height - (r + 1) * h, w + 0.5, h + 0.5);
    });
    ctx.globalAlpha = 1;
  }
  for (const p of points) {
    ctx.fillStyle = COLORS[p.label];
    ctx.beginPath();
    ctx.arc((p.x + 1) / 2 * cv.width, (1 - p.y) / 2 * cv.height, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }
}

function retrain() {
  const classes = new Set(points.map((p) => p.label));
  if (classes.size < 2) {
    $("svm-status").textContent = "add points of at least two classes";
    drawBoard(null);
    return;
  }
  try {
    const out = JSON.parse(svm_regions(JSON.stringify({
      points, degree: +$("deg").value, regularization: +$("c").value, grid: 64,
    })));
    $("svm-status").textContent =
      `${out.support_vectors} support vectors, train accuracy ${(100 * out.train_accuracy).toFixed(0)}%`;
    $("svm-status").className = "";
    drawBoard(out);
  } catch (e) {
    $("svm-status").textContent = e.message;
    $("svm-status").className = "error";
  }
}

await init();
["vn", "fn", "ids", "ep"].forEach(bindSlider);
$("run").addEventListener("click", runExperiment);
$("board").addEventListener("click", (ev) => { points.push({ ...toUnit(ev), label: currentClass }); retrain(); });
$("clear").addEventListener("click", () => { points.length = 0; retrain(); });
$("deg").addEventListener("change", retrain);
$("c").addEventListener("change", retrain);
document.addEventListener("keydown", (ev) => {
  const k = Number(ev.key);
  if (k >= 1 && k <= COLORS.length) {
    currentClass = k - 1;
    $("cls").textContent = k;
    $("cls").style.color = COLORS[currentClass];
  }
});
drawBoard(null);
