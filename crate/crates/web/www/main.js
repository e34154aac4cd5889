import init, { waterfill, compareDesigns, sweep } from "./pkg/aircomp_web.js";

const COLORS = {
  proposed: "#1f77b4",
  ignore_correlation: "#ff7f0e",
  comm_then_compute: "#2ca02c",
  random: "#d62728",
};

const $ = (id) => document.getElementById(id);
const list = (id) => $(id).value.split(",").map((s) => s.trim()).filter((s) => s.length).map(Number);

function params() {
  const p = {};
  for (const key of ["n", "m", "r", "K", "seed"]) p[key] = parseInt($(key).value, 10);
  for (const key of ["p0", "snr_db", "rho_data", "rho_noise"]) p[key] = parseFloat($(key).value);
  return p;
}

function show(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "error" : "";
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return ctx;
}

function bars(canvas, labels, values, colors, title) {
  const ctx = clear(canvas);
  const pad = 40;
  const top = Math.max(...values, 1e-12);
  const slot = (canvas.width - 2 * pad) / values.length;
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad, 14);
  values.forEach((v, i) => {
    const h = (v / top) * (canvas.height - 2 * pad);
    const x = pad + i * slot + slot * 0.15;
    ctx.fillStyle = colors[i] || "#1f77b4";
    ctx.fillRect(x, canvas.height - pad - h, slot * 0.7, h);
    ctx.fillStyle = "#222";
    if (values.length <= 24) {
      ctx.fillText(labels[i], x, canvas.height - pad + 14);
      ctx.fillText(v.toPrecision(3), x, canvas.height - pad - h - 4);
    }
  });
}

function lines(canvas, series, xs, title) {
  const ctx = clear(canvas);
  const pad = 50;
  const ys = series.flatMap((s) => s.points.map((p) => p[1])).filter(Number.isFinite);
  if (!ys.length) return;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys) * 0.9, Math.max(...ys) * 1.1];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((y - y0) / (y1 - y0 || 1)) * (canvas.height - 2 * pad);
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad, 14);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  xs.forEach((x) => ctx.fillText(String(x), sx(x) - 6, canvas.height - pad + 16));
  ctx.fillText(y1.toPrecision(3), 4, pad + 4);
  ctx.fillText(y0.toPrecision(3), 4, canvas.height - pad);
  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = COLORS[s.name] || "#555";
    ctx.beginPath();
    s.points.filter((p) => Number.isFinite(p[1])).forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(sx(x), sy(y));
      else ctx.lineTo(sx(x), sy(y));
      ctx.fillRect(sx(x) - 2, sy(y) - 2, 4, 4);
    });
    ctx.stroke();
    ctx.fillText(s.name, canvas.width - pad - 130, pad + 16 + 14 * k);
  });
}

function runCompare() {
  try {
    const result = compareDesigns(params());
    const names = result.designs.map((d) => d.method);
    bars($("compare-chart"), names, result.designs.map((d) => d.normalized_mse),
      names.map((n) => COLORS[n]), "closed-form MSE / nK");
    const active = result.modes.phi_sq.map((_, j) => j);
    bars($("modes-chart"), active.map(String), result.modes.phi_sq, [], "proposed: power per mode |phi_j|^2");
    show("compare-out", result.designs
      .map((d) => `${d.method.padEnd(20)} mse/nK = ${d.normalized_mse.toFixed(5)}  power = ${d.transmit_power.toFixed(4)}`)
      .join("\n"));
  } catch (e) {
    show("compare-out", String(e), true);
  }
}

function runSweep() {
  try {
    const variable = $("sweep-var").value;
    const values = list("sweep-values");
    const points = sweep(params(), variable, values,
      parseInt($("sweep-t").value, 10), parseInt($("sweep-z").value, 10));
    const byMethod = new Map();
    for (const p of points) {
      if (!byMethod.has(p.method)) byMethod.set(p.method, []);
      byMethod.get(p.method).push([p.value, p.normalized_mse ?? NaN]);
    }
    const series = [...byMethod].map(([name, pts]) => ({ name, points: pts }));
    lines($("sweep-chart"), series, values, `normalized MSE vs ${variable}`);
    const warnings = points.filter((p) => p.warning).map((p) => `warning: ${p.warning}`);
    const rows = points.map((p) =>
      `${String(p.value).padEnd(8)} ${p.method.padEnd(20)} ${p.normalized_mse?.toFixed(5) ?? "-"} ± ${p.std_error?.toFixed(5) ?? "-"}`);
    show("sweep-out", [...warnings, ...rows].join("\n"));
  } catch (e) {
    show("sweep-out", String(e), true);
  }
}

function runWaterfill() {
  try {
    const a = waterfill(list("wf-delta"), list("wf-lambda"), list("wf-r"),
      parseFloat($("wf-p0").value), parseInt($("wf-limit").value, 10));
    bars($("wf-chart"), a.phi_sq.map((_, j) => `mode ${j}`), a.phi_sq, [], "|phi_j|^2");
    show("wf-out", `phi_sq     = [${a.phi_sq.map((v) => v.toFixed(6)).join(", ")}]\n` +
      `active     = [${a.active_set.join(", ")}]\nmultiplier = ${a.multiplier.toPrecision(6)}\n` +
      `objective  = ${a.objective.toPrecision(6)}\npower      = ${a.power.toPrecision(6)}`);
  } catch (e) {
    show("wf-out", String(e), true);
  }
}

await init();
$("compare").addEventListener("click", runCompare);
$("sweep").addEventListener("click", runSweep);
$("waterfill").addEventListener("click", runWaterfill);
runWaterfill();
runCompare();
