/** Client for the melsynth synthesis service. The UI never computes audio
 * or Mel values itself; everything displayed comes back from these calls. */

export interface EmbeddingsInfo {
  dim: number;
  names: string[];
  coordinates: [number, number][];
}

export interface Matrix {
  rows: number;
  cols: number;
  data: Float32Array;
}

export interface MorphSpec {
  a: number;
  b: number;
  lam: number;
}

export interface SynthesizeBody {
  midi_b64?: string;
  instrument?: number;
  embedding?: [number, number];
  morph?: MorphSpec;
  vocoder?: "preview" | "wavenet" | "none";
  temperature?: number;
  seed?: number;
}

export interface SynthesizeResult {
  frames: number;
  sample_rate: number;
  mel: Matrix;
  wav: ArrayBuffer | null;
  timings_ms: Record<string, number>;
}

export interface HealthInfo {
  status: string;
  sample_rate: number;
  mel2mel: { kind: string; config: Record<string, unknown>; iteration: number } | null;
  wavenet: { kind: string; config: Record<string, unknown>; iteration: number } | null;
  grid_maps: string[];
}

/** Error details the service attaches to non-2xx responses. The MIDI
 * parser reports the byte offset of the failure alongside the message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(formatDetail(detail));
  }
}

export function formatDetail(detail: unknown): string {
  if (typeof detail === "string") return detail;
  if (detail && typeof detail === "object") {
    const d = detail as { error?: unknown; offset?: unknown };
    if (typeof d.error === "string" && typeof d.offset === "number") {
      return `${d.error} (byte offset ${d.offset})`;
    }
    return JSON.stringify(detail);
  }
  return String(detail);
}

/** Decode the binary matrix dump: uint32 rows, uint32 cols (little-endian),
 * then rows*cols float32 cells in row-major order. */
export function decodeMatrix(buf: ArrayBuffer): Matrix {
  if (buf.byteLength < 8) throw new Error("matrix dump shorter than its 8-byte header");
  const header = new DataView(buf);
  const rows = header.getUint32(0, true);
  const cols = header.getUint32(4, true);
  if (buf.byteLength !== 8 + 4 * rows * cols) {
    throw new Error(`matrix dump size mismatch: header says ${rows}x${cols}, got ${buf.byteLength} bytes`);
  }
  return { rows, cols, data: new Float32Array(buf, 8, rows * cols) };
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  for (let i = 0; i < bytes.length; i += 0x8000) {
    binary += String.fromCharCode(...bytes.subarray(i, i + 0x8000));
  }
  return btoa(binary);
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  return bytes;
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail: unknown = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body === "object" && "detail" in body) detail = body.detail;
  } catch {
    /* non-JSON error body, keep the status line */
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async health(): Promise<HealthInfo> {
    const resp = await this.fetchFn(`${this.base}/health`);
    await raiseForStatus(resp);
    return resp.json();
  }

  async embeddings(): Promise<EmbeddingsInfo> {
    const resp = await this.fetchFn(`${this.base}/embeddings`);
    await raiseForStatus(resp);
    return resp.json();
  }

  async grid(map: "centroid" | "energy"): Promise<Matrix> {
    const resp = await this.fetchFn(`${this.base}/grid?map=${map}`);
    await raiseForStatus(resp);
    return decodeMatrix(await resp.arrayBuffer());
  }

  async synthesize(body: SynthesizeBody, signal?: AbortSignal): Promise<SynthesizeResult> {
    const resp = await this.fetchFn(`${this.base}/synthesize?format=json`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    await raiseForStatus(resp);
    const json = await resp.json();
    return {
      frames: json.frames,
      sample_rate: json.sample_rate,
      mel: decodeMatrix(base64ToBytes(json.mel_b64).buffer as ArrayBuffer),
      wav: json.wav_b64 == null ? null : (base64ToBytes(json.wav_b64).buffer as ArrayBuffer),
      timings_ms: json.timings_ms,
    };
  }
}
