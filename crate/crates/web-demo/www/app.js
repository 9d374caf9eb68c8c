import init, { Chip, eloDemo } from "./pkg/sonar_web.js";

const $ = (id) => document.getElementById(id);
const status = $("status");

function fail(e) {
  status.textContent = String(e);
  status.className = "err";
}

function drawChip(chip, colormap) {
  const n = chip.size;
  const img = new ImageData(new Uint8ClampedArray(chip.rgba(colormap)), n, n);
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  const ctx = $("chip").getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, 256, 256);
}

function showMetrics(rows) {
  const t = $("metrics");
  t.innerHTML = "<tr><th>metric</th><th>value</th></tr>";
  for (const r of rows) {
    const tr = t.insertRow();
    tr.insertCell().textContent = r.name;
    const td = tr.insertCell();
    if (r.value === null) {
      td.textContent = r.error;
      td.className = "err";
    } else {
      td.textContent = r.value.toPrecision(5);
    }
  }
}

// small line plot; xs and ys are arrays of numbers
function plot(canvas, xs, ys, xlabel, ylabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const m = 36;
  ctx.clearRect(0, 0, w, h);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => m + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * m);
  const sy = (y) => h - m - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * m);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(m, m, w - 2 * m, h - 2 * m);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${x0.toPrecision(3)}`, m, h - m + 14);
  ctx.fillText(`${x1.toPrecision(3)}`, w - m - 24, h - m + 14);
  ctx.fillText(`${y1.toPrecision(4)}`, 2, m + 4);
  ctx.fillText(`${y0.toPrecision(4)}`, 2, h - m);
  ctx.fillText(xlabel, w / 2 - 20, h - 6);
  ctx.fillText(ylabel, m, m - 8);
  return { ctx, sx, sy };
}

function renderChip(ev) {
  ev?.preventDefault();
  const f = new FormData($("chip-form"));
  let chip;
  try {
    chip = new Chip(f.get("texture"), Number(f.get("size")), Number(f.get("mpp")), BigInt(f.get("seed")));
    drawChip(chip, f.get("colormap"));
    showMetrics(JSON.parse(chip.metrics(15)));
    const curve = JSON.parse(chip.lacunarityCurve());
    const { ctx, sx, sy } = plot($("lac"), curve.map((p) => p[0]), curve.map((p) => p[1]), "box size (m)", "lacunarity");
    ctx.strokeStyle = "#1f5f9f";
    ctx.beginPath();
    curve.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  } catch (e) {
    fail(e);
  } finally {
    chip?.free();
  }
}

function renderElo(ev) {
  ev?.preventDefault();
  const f = new FormData($("elo-form"));
  try {
    const d = JSON.parse(eloDemo(
      Number(f.get("n")), Number(f.get("m")), Number(f.get("noise")), Number(f.get("reps")), BigInt(f.get("seed")),
    ));
    const rho = d.spearman === null ? "undefined" : d.spearman.toFixed(3);
    $("elo-summary").textContent = `${d.judgments} judgments, Spearman vs latent complexity ${rho}`;
    const xs = d.ranked.map((_, i) => i + 1);
    const lo = d.ranked.map((r) => r.ci_low);
    const hi = d.ranked.map((r) => r.ci_high);
    const { ctx, sx, sy } = plot($("elo"), xs, lo.concat(hi), "rank", "Elo rating");
    d.ranked.forEach((r, i) => {
      const x = sx(i + 1);
      ctx.strokeStyle = "#aaa";
      ctx.beginPath();
      ctx.moveTo(x, sy(r.ci_low));
      ctx.lineTo(x, sy(r.ci_high));
      ctx.stroke();
      ctx.fillStyle = "#1f5f9f";
      ctx.fillRect(x - 2, sy(r.mean) - 2, 4, 4);
    });
    status.textContent = "ready";
    status.className = "";
  } catch (e) {
    fail(e);
  }
}

init().then(() => {
  status.textContent = "ready";
  $("chip-form").addEventListener("submit", renderChip);
  $("elo-form").addEventListener("submit", renderElo);
  renderChip();
  renderElo();
}, fail);
