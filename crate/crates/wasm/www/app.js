import init, { run_program, parity_scan, cz_tomography } from "./pkg/scq_wasm.js";

const $ = (id) => document.getElementById(id);
let lastRun = null;

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function drawHistogram() {
  if (!lastRun) return;
  const k = Number($("point").value);
  const p = lastRun.points[k];
  const probs = p.probs_corrected ?? p.probs_raw;
  const keys = Object.keys(probs).sort();
  $("point-label").textContent = `γ = ${p.gamma.toFixed(4)}`;
  const c = $("hist");
  const ctx = clear(c);
  const pad = 30, w = (c.width - 2 * pad) / Math.max(keys.length, 1);
  const hi = Math.max(1e-9, ...keys.map((b) => Math.abs(probs[b])));
  const zero = c.height - pad;
  ctx.font = "10px monospace";
  keys.forEach((b, i) => {
    const v = probs[b];
    const h = (Math.abs(v) / hi) * (c.height - 2 * pad);
    ctx.fillStyle = v < 0 ? "#c44" : "#37a";
    ctx.fillRect(pad + i * w + 1, v < 0 ? zero : zero - h, Math.max(w - 2, 1), v < 0 ? Math.min(h, pad) : h);
    if (keys.length <= 32) {
      ctx.save();
      ctx.translate(pad + i * w + w / 2, zero + 4);
      ctx.rotate(Math.PI / 2);
      ctx.fillStyle = "#333";
      ctx.fillText(b, 0, 0);
      ctx.restore();
    }
  });
  ctx.fillStyle = "#333";
  ctx.fillText(`max ${hi.toFixed(4)}`, pad, pad - 10);
}

function runProgram() {
  $("run-err").textContent = "";
  try {
    const doc = JSON.parse(run_program($("src").value, Number($("shots").value), $("backend").value,
      $("correct").checked, Number($("seed").value)));
    lastRun = doc;
    $("point").max = String(doc.points.length - 1);
    $("point").value = "0";
    drawHistogram();
  } catch (e) {
    $("run-err").textContent = String(e.message ?? e);
  }
}

function runParity() {
  $("p-err").textContent = "";
  try {
    const r = JSON.parse(parity_scan(Number($("pn").value), Number($("poff").value), $("pbackend").value,
      Number($("pshots").value), Number($("ppoints").value), 7));
    $("p-out").textContent =
      `P = ${r.population.toFixed(4)}   C = ${r.coherence.toFixed(4)}   F = ${r.fidelity.toFixed(4)}` +
      (r.fidelity > 0.5 ? "   (genuinely entangled)" : "");
    const c = $("parity");
    const ctx = clear(c);
    const pad = 30;
    const x = (g) => pad + ((g - r.gammas[0]) / (r.gammas.at(-1) - r.gammas[0])) * (c.width - 2 * pad);
    const y = (v) => c.height / 2 - v * (c.height / 2 - pad);
    ctx.strokeStyle = "#bbb";
    ctx.beginPath(); ctx.moveTo(pad, y(0)); ctx.lineTo(c.width - pad, y(0)); ctx.stroke();
    const n = Number($("pn").value);
    ctx.strokeStyle = "#e80";
    ctx.beginPath();
    for (let i = 0; i <= 400; i++) {
      const g = r.gammas[0] + (i / 400) * (r.gammas.at(-1) - r.gammas[0]);
      const v = r.coherence * Math.cos(n * g + r.phase);
      i ? ctx.lineTo(x(g), y(v)) : ctx.moveTo(x(g), y(v));
    }
    ctx.stroke();
    ctx.fillStyle = "#37a";
    r.gammas.forEach((g, i) => { ctx.beginPath(); ctx.arc(x(g), y(r.parities[i]), 3, 0, 2 * Math.PI); ctx.fill(); });
  } catch (e) {
    $("p-err").textContent = String(e.message ?? e);
  }
}

function runQpt() {
  const r = JSON.parse(cz_tomography(Number($("pair").value), $("qbackend").value));
  $("q-out").textContent = `Q${r.pair[0] + 1}Q${r.pair[1] + 1}: F_χ = ${r.fidelity.toFixed(4)}   (cell shade = |χ_mn|, basis I, X, −iY, Z per qubit)`;
  const c = $("chi");
  const ctx = clear(c);
  const cell = c.width / 16;
  const mags = r.re.map((re, k) => Math.hypot(re, r.im[k]));
  const hi = Math.max(...mags);
  mags.forEach((m, k) => {
    const shade = Math.round(255 * (1 - m / hi));
    ctx.fillStyle = `rgb(${shade},${shade},255)`;
    ctx.fillRect((k % 16) * cell, Math.floor(k / 16) * cell, cell - 1, cell - 1);
  });
}

await init();
for (let q = 0; q < 9; q++) {
  const o = document.createElement("option");
  o.value = String(q);
  o.textContent = `Q${q + 1}Q${q + 2}`;
  $("pair").append(o);
}
$("run").onclick = runProgram;
$("point").oninput = drawHistogram;
$("prun").onclick = runParity;
$("qrun").onclick = runQpt;
runProgram();
