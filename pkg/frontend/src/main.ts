/** Viewer entry point: load the bundle named by ?bundle=, then run a
 * render-on-demand loop (frames are a pure function of the camera, so the
 * loop only redraws after input). */

import { maxDisparityPx } from "./blend.js";
import { boundsAroundPoses, OrbitControls } from "./controls.js";
import { Hud } from "./hud.js";
import { LoadedBundle, loadBundle } from "./loader.js";
import { Renderer } from "./renderer.js";

async function start(): Promise<void> {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const hudElement = document.getElementById("hud") as HTMLElement;
  const hud = new Hud(hudElement);
  const params = new URLSearchParams(window.location.search);
  const manifestUrl = params.get("bundle") ?? "manifest.json";

  let bundle: LoadedBundle;
  try {
    bundle = await loadBundle(manifestUrl, (loaded, total) => {
      hud.setMessage(`loading planes ${loaded}/${total}`);
    });
  } catch (err) {
    hud.setMessage(`load error: ${(err as Error).message}`);
    throw err;
  }
  hud.setMessage(`loaded ${bundle.mpis.length} MPIs x ` +
                 `${bundle.mpis[0].disparities.length} planes`);

  const renderer = new Renderer(canvas, bundle);
  const poses = bundle.mpis.map((m) => m.pose);
  const margin = parseFloat(params.get("bounds") ?? "") ||
    bundle.manifest.z_min * 0.75;
  const controls = new OrbitControls(poses[0], poses, bundle.manifest.z_min,
                                     boundsAroundPoses(poses, margin));
  for (const key of ["x", "y", "z"] as const) {
    const v = parseFloat(params.get(key) ?? "");
    if (Number.isFinite(v)) {
      const i = key === "x" ? 0 : key === "y" ? 1 : 2;
      controls.focus[i] += v;
    }
  }
  controls.attach(canvas);

  let dirty = true;
  let frameCount = 0;
  controls.onChange = () => { dirty = true; };

  function loop(): void {
    if (dirty) {
      dirty = false;
      const camera = controls.pose();
      renderer.frame(camera);
      const nearest = Math.min(
        ...poses.map((p) => maxDisparityPx(camera.center, p, bundle.manifest.z_min)));
      hud.setDisparity(nearest);
      if (frameCount % 30 === 0) {
        hud.setCoverageFallback(renderer.coverageFallbackFraction(camera));
      }
      frameCount += 1;
      hud.tick();
    }
    requestAnimationFrame(loop);
  }
  loop();
}

start();
