/** Web bundle manifest: schema types and validation. */

export const SUPPORTED_VERSION = 1;
export const CAMERA_RECORD_LEN = 17;

export type BlendMode = "grid-bilinear" | "irregular-exponential";

export interface BlendConfig {
  mode: BlendMode;
  neighbors: number;
  gamma: number | null; // pixels/meter, irregular mode only
  focal_px: number;
  num_planes: number;
}

export interface MpiEntry {
  /** W H focal_px cx cy r00..r22 tx ty tz */
  camera: number[];
  /** ascending, far to near (1/meters) */
  disparities: number[];
  /** plane image paths, far to near */
  planes: string[];
}

export interface Manifest {
  version: number;
  width_px: number;
  height_px: number;
  z_min: number;
  z_max: number | null;
  blend: BlendConfig;
  mpis: MpiEntry[];
}

export class ManifestError extends Error {}

function fail(msg: string): never {
  throw new ManifestError(msg);
}

export function validateManifest(data: unknown): Manifest {
  if (typeof data !== "object" || data === null) fail("manifest is not an object");
  const m = data as Manifest;
  if (m.version !== SUPPORTED_VERSION) {
    fail(`unsupported manifest version ${m.version} (expected ${SUPPORTED_VERSION})`);
  }
  if (!Number.isInteger(m.width_px) || m.width_px < 1) fail("bad width_px");
  if (!Number.isInteger(m.height_px) || m.height_px < 1) fail("bad height_px");
  if (!(m.z_min > 0)) fail("z_min must be positive");
  if (m.z_max !== null && !(m.z_max >= m.z_min)) fail("z_max must be null or >= z_min");

  const blend = m.blend;
  if (!blend) fail("missing blend config");
  if (blend.mode !== "grid-bilinear" && blend.mode !== "irregular-exponential") {
    fail(`unknown blend mode ${String(blend.mode)}`);
  }
  if (!(blend.neighbors >= 1)) fail("blend.neighbors must be >= 1");
  if (blend.mode === "irregular-exponential" && !(blend.gamma !== null && blend.gamma > 0)) {
    fail("irregular mode requires a positive gamma");
  }

  if (!Array.isArray(m.mpis) || m.mpis.length === 0) fail("manifest lists no MPIs");
  m.mpis.forEach((entry, k) => {
    if (!Array.isArray(entry.camera) || entry.camera.length !== CAMERA_RECORD_LEN) {
      fail(`mpi ${k}: camera record must have ${CAMERA_RECORD_LEN} fields`);
    }
    if (!entry.camera.every(Number.isFinite)) fail(`mpi ${k}: non-finite camera field`);
    const d = entry.disparities;
    if (!Array.isArray(d) || d.length === 0) fail(`mpi ${k}: no disparities`);
    for (let i = 0; i < d.length; i++) {
      if (!(d[i] >= 0)) fail(`mpi ${k}: negative disparity at ${i}`);
      if (i > 0 && !(d[i] > d[i - 1])) fail(`mpi ${k}: disparities not ascending at ${i}`);
    }
    if (!Array.isArray(entry.planes) || entry.planes.length !== d.length) {
      fail(`mpi ${k}: ${entry.planes?.length ?? 0} plane files for ${d.length} disparities`);
    }
    const w = entry.camera[0];
    const h = entry.camera[1];
    if (w !== m.width_px || h !== m.height_px) {
      fail(`mpi ${k}: camera raster ${w}x${h} disagrees with manifest ` +
           `${m.width_px}x${m.height_px}`);
    }
  });
  return m;
}
