import init, { compareScans, simulateWorld, trainAndScore } from "./pkg/wifio_web.js";

const $ = (id) => document.getElementById(id);

function guarded(outId, fn) {
  return () => {
    const out = $(outId);
    out.classList.remove("err");
    out.textContent = "working...";
    // let the status text paint before the synchronous call
    setTimeout(() => {
      try {
        fn(out);
      } catch (e) {
        out.classList.add("err");
        out.textContent = String(e.message ?? e);
      }
    }, 10);
  };
}

function fmt(x, d = 3) {
  return x === null || x === undefined ? "-" : Number(x).toFixed(d);
}

function truthBand(ctx, timeline, w) {
  const end = timeline[timeline.length - 1].t_s || 1;
  for (const s of timeline) {
    ctx.fillStyle = s.indoor ? "#333" : "#ddd";
    ctx.fillRect((s.t_s / end) * w, 0, Math.max(1, w / timeline.length), 10);
  }
  return end;
}

function line(ctx, timeline, end, w, h, key, color, scale) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  timeline.forEach((s, i) => {
    const x = (s.t_s / end) * w;
    const y = h - 4 - scale(s[key]) * (h - 20);
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  });
  ctx.stroke();
}

function drawWorld(v) {
  const c = $("world-canvas");
  const ctx = c.getContext("2d");
  const { width: w, height: h } = c;
  ctx.clearRect(0, 0, w, h);
  const t = v.timeline;
  if (!t.length) return;
  const end = truthBand(ctx, t, w);
  const maxAps = Math.max(1, ...t.map((s) => s.aps));
  line(ctx, t, end, w, h, "aps", "#aaa", (a) => a / maxAps);
  for (const s of t) {
    ctx.fillStyle = `hsl(${(s.cluster * 137) % 360} 70% 45%)`;
    ctx.fillRect((s.t_s / end) * w, h - 4 - (s.cluster / Math.max(1, v.clusters - 1)) * (h - 20), 2, 2);
  }
}

function drawScores(v) {
  const c = $("train-canvas");
  const ctx = c.getContext("2d");
  const { width: w, height: h } = c;
  ctx.clearRect(0, 0, w, h);
  const t = v.timeline;
  if (!t.length) return;
  const end = truthBand(ctx, t, w);
  ctx.setLineDash([4, 4]);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, h - 4 - 0.5 * (h - 20));
  ctx.lineTo(w, h - 4 - 0.5 * (h - 20));
  ctx.stroke();
  ctx.setLineDash([]);
  line(ctx, t, end, w, h, "fingerprint", "#e80", (x) => x);
  line(ctx, t, end, w, h, "graph", "#16c", (x) => x);
}

$("compare").onclick = guarded("compare-out", (out) => {
  const v = JSON.parse(compareScans($("scan-a").value, $("scan-b").value, $("adjacent").checked));
  out.textContent = `distance ${fmt(v.distance, 4)} (${v.case.replace("_", " ")})`;
  const rows = v.aps
    .map((r) => `<tr><td>${r.bssid}</td><td>${r.dbm_a ?? "-"}</td><td>${r.dbm_b ?? "-"}</td><td>${fmt(r.rank_a, 1)}</td><td>${fmt(r.rank_b, 1)}</td></tr>`)
    .join("");
  $("compare-table").innerHTML = `<tr><th>bssid</th><th>dBm A</th><th>dBm B</th><th>rank A</th><th>rank B</th></tr>${rows}`;
});

$("simulate").onclick = guarded("world-out", (out) => {
  const v = JSON.parse(simulateWorld($("world-spec").value, Number($("world-seed").value), Number($("world-eps").value)));
  out.textContent = `${v.fingerprints} scans, ${v.aps} APs, ${v.clusters} clusters (mean size ${fmt(v.mean_cluster_size, 1)}, largest ${v.largest_cluster}), ${v.edges} edges`;
  drawWorld(v);
});

$("train").onclick = guarded("train-out", (out) => {
  const v = JSON.parse(trainAndScore($("world-spec").value, Number($("train-seed").value), Number($("test-seed").value), $("learner").value));
  out.textContent = `AUC graph ${fmt(v.graph_auc, 4)} vs fingerprint ${fmt(v.fingerprint_auc, 4)}; accuracy ${fmt(v.graph_accuracy)} vs ${fmt(v.fingerprint_accuracy)}`;
  drawScores(v);
});

init().then(
  () => ($("status").textContent = "Ready."),
  (e) => ($("status").textContent = `Failed to load the module: ${e}`),
);
