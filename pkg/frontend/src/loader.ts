/** Bundle loading: fetch the manifest, validate it, stream in the plane
 * textures with progress reporting. */

import { Manifest, ManifestError, validateManifest } from "./manifest.js";
import { CameraPose, cameraFromRecord } from "./math.js";

export interface LoadedMpi {
  pose: CameraPose;
  disparities: number[];
  /** decoded plane images, far to near */
  planes: ImageBitmap[];
}

export interface LoadedBundle {
  manifest: Manifest;
  mpis: LoadedMpi[];
}

export type ProgressCallback = (loaded: number, total: number, note: string) => void;

async function fetchImage(url: string): Promise<ImageBitmap> {
  const res = await fetch(url);
  if (!res.ok) {
    throw new ManifestError(`missing plane file ${url} (${res.status})`);
  }
  const blob = await res.blob();
  // premultiply in the shader; keep straight alpha here
  return createImageBitmap(blob, { premultiplyAlpha: "none", colorSpaceConversion: "none" });
}

export async function loadBundle(manifestUrl: string,
                                 onProgress: ProgressCallback = () => {}): Promise<LoadedBundle> {
  const res = await fetch(manifestUrl);
  if (!res.ok) {
    throw new ManifestError(`cannot fetch manifest ${manifestUrl} (${res.status})`);
  }
  const manifest = validateManifest(await res.json());
  const base = new URL(manifestUrl, window.location.href);
  const total = manifest.mpis.reduce((n, entry) => n + entry.planes.length, 0);
  let loaded = 0;
  onProgress(0, total, "manifest ok");

  const mpis: LoadedMpi[] = [];
  for (const [k, entry] of manifest.mpis.entries()) {
    const planes: ImageBitmap[] = [];
    for (const name of entry.planes) {
      const image = await fetchImage(new URL(name, base).href);
      if (image.width !== manifest.width_px || image.height !== manifest.height_px) {
        throw new ManifestError(
          `${name}: ${image.width}x${image.height} does not match manifest raster`);
      }
      planes.push(image);
      loaded += 1;
      onProgress(loaded, total, `mpi ${k}`);
    }
    mpis.push({
      pose: cameraFromRecord(entry.camera),
      disparities: entry.disparities,
      planes,
    });
  }
  return { manifest, mpis };
}
