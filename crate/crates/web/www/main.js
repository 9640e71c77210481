import init, { track_blob, run_calibration, pyramid_view } from "./pkg/facemotion_web.js";

const $ = (id) => document.getElementById(id);

function drawGray(canvas, w, h, pixels) {
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(w, h);
  for (let i = 0; i < pixels.length; i++) {
    img.data[4 * i] = img.data[4 * i + 1] = img.data[4 * i + 2] = pixels[i];
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
  return ctx;
}

function bindSliders(ids, onChange) {
  for (const id of ids) {
    const input = $(id);
    const show = () => { $(`${id}-out`).textContent = input.value; };
    show();
    input.addEventListener("input", () => { show(); onChange(id); });
  }
}

function updateBlob() {
  const dx = +$("dx").value, dy = +$("dy").value;
  const t = track_blob(64, 32, 32, dx, dy, +$("lv").value, +$("tau").value);
  drawGray($("blob-prev"), 64, 64, t.prev_pixels());
  const ctx = drawGray($("blob-next"), 64, 64, t.next_pixels());
  ctx.strokeStyle = t.valid() ? "#36f" : "#d33";
  ctx.beginPath();
  ctx.arc(32 + t.u(), 32 + t.v(), 3, 0, 2 * Math.PI);
  ctx.stroke();
  const err = Math.hypot(t.u() - dx, t.v() - dy);
  $("blob-result").textContent =
    `flow (${t.u().toFixed(3)}, ${t.v().toFixed(3)}), error ${err.toFixed(3)} px, ` +
    `round trip ${t.fb_error().toFixed(3)} px, ${t.valid() ? "valid" : "rejected"}`;
  t.free();
}

let run = null;

function drawCalibration() {
  if (!run) return;
  const f = +$("fr").value;
  const n = run.landmarks();
  const ctx = drawGray($("calib-canvas"), run.width(), run.height(), run.frame_pixels(f));
  const layers = [[run.truth(), "#2a2"], [run.raw(), "#d33"], [run.calibrated(), "#36f"]];
  for (const [pts, color] of layers) {
    ctx.fillStyle = color;
    for (let j = 0; j < n; j++) {
      const k = 2 * (f * n + j);
      ctx.fillRect(pts[k] - 1, pts[k + 1] - 1, 2, 2);
    }
  }
}

function updateCalibration() {
  if (run) run.free();
  run = run_calibration(7, 60, +$("jit").value, +$("out").value, +$("q").value, +$("r").value);
  const gain = 100 * (1 - run.calibrated_error() / run.raw_error());
  $("calib-result").textContent =
    `mean error raw ${run.raw_error().toFixed(3)} px, calibrated ${run.calibrated_error().toFixed(3)} px ` +
    `(${gain.toFixed(1)}% lower), ${run.rejected()} flow predictions rejected`;
  drawCalibration();
}

function updatePyramid() {
  const view = pyramid_view(3, +$("pl").value, 0.5);
  const holder = $("pyr-levels");
  holder.replaceChildren();
  for (let l = 0; l < view.level_count(); l++) {
    const c = document.createElement("canvas");
    drawGray(c, view.width(l), view.height(l), view.pixels(l));
    c.style.width = c.style.height = "256px";
    holder.appendChild(c);
  }
  view.free();
}

await init();
bindSliders(["dx", "dy", "lv", "tau"], updateBlob);
bindSliders(["jit", "out", "q", "r"], updateCalibration);
bindSliders(["fr"], drawCalibration);
bindSliders(["pl"], updatePyramid);
updateBlob();
updateCalibration();
updatePyramid();
