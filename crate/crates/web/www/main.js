// Build the bindings first: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { preprocess_preview, rectify_quad, enhance_text } from "./pkg/invizo_web.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };
let source = null;
let clicks = [];

function drawRgba(canvas, img) {
  canvas.width = img.width;
  canvas.height = img.height;
  const data = new ImageData(new Uint8ClampedArray(img.data()), img.width, img.height);
  canvas.getContext("2d").putImageData(data, 0, 0);
}

function redrawSource() {
  const c = $("src");
  c.getContext("2d").putImageData(source, 0, 0);
  const ctx = c.getContext("2d");
  ctx.fillStyle = "red";
  for (const [x, y] of clicks) ctx.fillRect(x - 3, y - 3, 6, 6);
}

$("file").addEventListener("change", async (e) => {
  const file = e.target.files[0];
  if (!file) return;
  const bitmap = await createImageBitmap(file);
  const c = $("src");
  c.width = bitmap.width;
  c.height = bitmap.height;
  c.getContext("2d").drawImage(bitmap, 0, 0);
  source = c.getContext("2d").getImageData(0, 0, c.width, c.height);
  clicks = [];
  status("");
});

$("h").addEventListener("input", () => { $("hval").textContent = $("h").value; });

$("run-pre").addEventListener("click", () => {
  if (!source) return status("load an image first");
  try {
    const t0 = performance.now();
    drawRgba($("pre"), preprocess_preview(source.data, source.width, source.height, Number($("h").value)));
    status(`preprocessed in ${Math.round(performance.now() - t0)} ms`);
  } catch (err) {
    status(String(err));
  }
});

$("src").addEventListener("click", (e) => {
  if (!source) return;
  const c = $("src");
  const r = c.getBoundingClientRect();
  clicks.push([(e.clientX - r.left) * c.width / r.width, (e.clientY - r.top) * c.height / r.height]);
  redrawSource();
  if (clicks.length === 4) {
    try {
      drawRgba($("crop"), rectify_quad(source.data, source.width, source.height, new Float64Array(clicks.flat())));
      status("");
    } catch (err) {
      status(String(err));
    }
    clicks = [];
  }
});

$("reset").addEventListener("click", () => { clicks = []; if (source) redrawSource(); });

$("run-enh").addEventListener("click", () => {
  try {
    const out = JSON.parse(enhance_text($("ftype").value, $("raw").value, $("poss").value));
    $("enh-out").textContent = JSON.stringify(out, null, 2);
  } catch (err) {
    $("enh-out").textContent = String(err);
  }
});

await init();
