import init, { defaultConfig, bathSummary, simulate, oracle } from "./pkg/heom_web.js";

const form = document.getElementById("params");
const status = document.getElementById("status");
const canvas = document.getElementById("plot");
const colours = { xi_q: "#1f77b4", xi_p: "#d62728", xi_qq: "#2ca02c", xi_pp: "#9467bd" };

function readConfig() {
  const f = new FormData(form);
  const num = (k) => Number(f.get(k));
  const cfg = JSON.parse(defaultConfig());
  cfg.bath.strength = num("strength");
  cfg.bath.cutoff = num("cutoff");
  cfg.bath.beta = f.get("beta") === "" ? "zero" : num("beta");
  cfg.basis.k = num("k");
  cfg.hierarchy.n_max = num("n_max");
  cfg.initial.q0 = num("q0");
  cfg.initial.p0 = num("p0");
  // keep the default Δt and stride, stretch the step count to the requested end time
  const dt = cfg.integrator.dt;
  const stride = cfg.integrator.stride;
  cfg.integrator.steps = Math.ceil(num("t_end") / cfg.system.omega_s / dt / stride) * stride;
  cfg.oracle.modes = 48;
  return JSON.stringify(cfg);
}

function draw(solid, dashed) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const series = [solid, dashed].filter(Boolean);
  const tMax = Math.max(...series.map((s) => s.w_s_t[s.w_s_t.length - 1]));
  const keys = Object.keys(colours);
  const values = series.flatMap((s) => keys.flatMap((k) => s[k])).filter(Number.isFinite);
  const lo = Math.min(...values, 0), hi = Math.max(...values, 1);
  const x = (t) => 40 + ((width - 60) * t) / tMax;
  const y = (v) => height - 30 - ((height - 50) * (v - lo)) / (hi - lo);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(x(0), y(0));
  ctx.lineTo(x(tMax), y(0));
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText("ω_S t", width - 50, height - 8);
  ctx.fillText(hi.toFixed(2), 2, y(hi) + 4);
  ctx.fillText(lo.toFixed(2), 2, y(lo));
  for (const [s, dash] of [[solid, []], [dashed, [6, 4]]]) {
    if (!s) continue;
    ctx.setLineDash(dash);
    for (const k of keys) {
      ctx.strokeStyle = colours[k];
      ctx.beginPath();
      s[k].forEach((v, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(s.w_s_t[i]), y(v)));
      ctx.stroke();
    }
  }
  ctx.setLineDash([]);
  keys.forEach((k, i) => {
    ctx.fillStyle = colours[k];
    ctx.fillText(k, 50 + 60 * i, 14);
  });
}

function guarded(action) {
  return () => {
    status.textContent = "Working…";
    // let the status repaint before the blocking call
    setTimeout(() => {
      try {
        const t0 = performance.now();
        action();
        status.textContent += ` (${((performance.now() - t0) / 1000).toFixed(1)} s)`;
      } catch (e) {
        status.textContent = `Error: ${e.message ?? e}`;
      }
    }, 20);
  };
}

document.getElementById("bath").addEventListener("click", guarded(() => {
  const s = JSON.parse(bathSummary(readConfig()));
  const rows = s.lambda.map((l, i) => `<tr><td>${i + 1}</td><td>${l.toExponential(3)}</td></tr>`).join("");
  document.getElementById("lambda").innerHTML =
    `<table><tr><th>k</th><th>λ<sub>k</sub></th></tr>${rows}</table>`;
  status.textContent = `${s.states} hierarchy members, counter-term coefficient ${s.kappa.toFixed(6)} eV`;
}));

document.getElementById("run").addEventListener("click", guarded(() => {
  const cfg = readConfig();
  const heom = JSON.parse(simulate(cfg));
  const exact = JSON.parse(oracle(cfg));
  draw(heom, exact);
  status.textContent = `final trace ${heom.norm[heom.norm.length - 1].toFixed(5)}`;
}));

document.getElementById("oracle").addEventListener("click", guarded(() => {
  draw(null, JSON.parse(oracle(readConfig())));
  status.textContent = "exact Gaussian moments";
}));

init().then(() => {
  status.textContent = "Ready.";
});
