import init, { side, class_names, load_frame, frame_rgba, augment_rgba, feature_maps_rgba, Corpus } from "./pkg/drivernet_web.js";

const $ = (id) => document.getElementById(id);

let N, corpus, frame, seed = 1;

function canvas(rgba, caption) {
  const fig = document.createElement("figure");
  const c = document.createElement("canvas");
  c.width = c.height = N;
  c.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), N, N), 0, 0);
  const cap = document.createElement("figcaption");
  cap.textContent = caption;
  fig.append(c, cap);
  return fig;
}

// Splits concatenated RGBA views into captioned canvases.
function show(target, rgba, captions) {
  const el = $(target);
  el.replaceChildren();
  const size = N * N * 4;
  captions.forEach((cap, i) => el.append(canvas(rgba.subarray(i * size, (i + 1) * size), cap)));
}

function guard(f) {
  return (...args) => {
    try {
      $("error").textContent = "";
      f(...args);
    } catch (e) {
      $("error").textContent = e.message ?? String(e);
    }
  };
}

const renderAugment = guard(() => {
  const rot = +$("rot").value, shift = +$("shift").value, bright = +$("bright").value;
  $("rot-v").textContent = rot;
  $("shift-v").textContent = shift;
  $("bright-v").textContent = bright;
  const views = [];
  for (let i = 0; i < 4; i++) views.push(...augment_rgba(frame, seed + i, rot, shift / 100, bright / 100));
  show("aug", Uint8Array.from(views), ["draw 1", "draw 2", "draw 3", "draw 4"]);
});

const renderMaps = guard(() =>
  show("maps", feature_maps_rgba(frame), ["Sobel x", "Sobel y", "Laplacian", "box blur"]));

const renderAverages = guard(() => {
  const a = +$("class-a").value, b = +$("class-b").value;
  show("avg", corpus.class_views_rgba(a, b), [`average c${a}`, `average c${b}`, `c${a} − c${b}`]);
});

function setFrame(gray) {
  frame = gray;
  const ctx = $("source").getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(frame_rgba(frame)), N, N), 0, 0);
  renderAugment();
  renderMaps();
}

const pickSample = guard(() => setFrame(corpus.sample(+$("class").value, +$("index").value)));

async function main() {
  await init();
  N = side();
  corpus = new Corpus(7, 6, 4);
  for (const id of ["class", "class-a", "class-b"]) {
    class_names().forEach((name, k) => $(id).append(new Option(name, k)));
  }
  $("class-b").value = 1;
  $("class").onchange = $("index").onchange = pickSample;
  $("upload").onchange = guard(async (ev) => {
    const file = ev.target.files[0];
    if (!file) return;
    try {
      setFrame(load_frame(new Uint8Array(await file.arrayBuffer())));
    } catch (e) {
      $("error").textContent = e.message ?? String(e);
    }
  });
  for (const id of ["rot", "shift", "bright"]) $(id).oninput = renderAugment;
  $("reroll").onclick = () => { seed += 4; renderAugment(); };
  $("class-a").onchange = $("class-b").onchange = renderAverages;
  pickSample();
  renderAverages();
}

main().catch((e) => { $("error").textContent = e.message ?? String(e); });
