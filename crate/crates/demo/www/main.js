import init, { Demo } from "./pkg/hyperslice_demo.js";

const SCALE = 24;
const $ = (id) => document.getElementById(id);

function blit(canvas, width, height, rgba) {
  canvas.width = width;
  canvas.height = height;
  const img = new ImageData(new Uint8ClampedArray(rgba), width, height);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function option(select, value, text) {
  const o = document.createElement("option");
  o.value = value;
  o.textContent = text;
  select.appendChild(o);
}

async function main() {
  await init();
  $("status").textContent = "computing distances and partition...";
  await new Promise((r) => setTimeout(r, 0));
  const demo = new Demo(1n, 256, 4, 17);
  const names = demo.parameterNames();
  const res = demo.resolution();
  const focus = names.map(() => 0.5);

  names.forEach((n, k) => {
    option($("axis-i"), k, n);
    option($("axis-j"), k, n);
    const label = document.createElement("label");
    label.textContent = `${n} `;
    const input = document.createElement("input");
    input.type = "range";
    input.min = 0;
    input.max = res - 1;
    input.value = (res - 1) / 2;
    input.oninput = () => {
      focus[k] = input.value / (res - 1);
      drawSlice();
    };
    label.appendChild(input);
    $("focus").appendChild(label);
  });
  $("axis-i").value = 1;
  $("axis-j").value = 2;

  function refreshClasses() {
    $("segment").innerHTML = "";
    $("legend").innerHTML = "";
    for (let c = 0; c < demo.clusterCount(); c++) {
      option($("segment"), c, `segment ${c}`);
      const color = demo.classColor(c);
      if (color) {
        const swatch = document.createElement("span");
        swatch.textContent = "■ ";
        swatch.style.color = color;
        $("legend").appendChild(swatch);
      }
    }
  }

  function drawSlice() {
    const i = Number($("axis-i").value);
    const j = Number($("axis-j").value);
    const unc = $("uncertainty").checked;
    const expr = $("expr").value.trim();
    $("error").textContent = "";
    let rgba;
    try {
      if (i === j) throw "choose two different axes";
      rgba = expr
        ? demo.projectionRgba(Number($("segment").value), expr, i, j, Float64Array.from(focus), unc, SCALE)
        : demo.sliceRgba(i, j, Float64Array.from(focus), unc, SCALE);
    } catch (e) {
      $("error").textContent = String(e);
      if (i === j) return;
      rgba = demo.sliceRgba(i, j, Float64Array.from(focus), unc, SCALE);
    }
    blit($("slice"), res * SCALE, res * SCALE, rgba);
  }

  function drawField() {
    const run = Math.min(Math.max(0, Number($("run").value)), demo.runCount() - 1);
    const steps = demo.timestepCount(run);
    $("step").max = steps - 1;
    const step = Math.min(Number($("step").value), steps - 1);
    const buf = demo.fieldRgba(run, step);
    const view = new DataView(buf.buffer, buf.byteOffset);
    const w = view.getUint32(0, true);
    const h = view.getUint32(4, true);
    blit($("field"), w, h, buf.subarray(8));
    $("run-name").textContent = `${demo.runName(run)}, timestep ${step}`;
  }

  $("clusters").onchange = () => {
    try {
      demo.setClusterCount(Number($("clusters").value));
      refreshClasses();
      drawSlice();
    } catch (e) {
      $("error").textContent = String(e);
    }
  };
  for (const id of ["axis-i", "axis-j", "uncertainty", "segment"]) $(id).onchange = drawSlice;
  $("expr").oninput = drawSlice;
  $("run").max = demo.runCount() - 1;
  $("run").oninput = drawField;
  $("step").oninput = drawField;

  refreshClasses();
  drawSlice();
  drawField();
  $("status").textContent = `${demo.runCount()} runs, ${names.length} parameters`;
}

main().catch((e) => {
  $("status").textContent = `failed: ${e}`;
});
