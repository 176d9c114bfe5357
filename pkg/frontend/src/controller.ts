/** UI state machine, kept free of DOM so the interaction contracts are
 * testable: one synthesis call per debounce window, latest response wins,
 * service errors surface verbatim. */

import { ApiError, formatDetail, bytesToBase64 } from "./api.js";
import type { EmbeddingsInfo, Matrix, SynthesizeBody, SynthesizeResult } from "./api.js";
import { AuditionScheduler } from "./scheduler.js";
import { clampToBounds, embeddingToPixel, gridBounds, lerp, pixelToEmbedding } from "./space.js";
import type { Bounds } from "./space.js";

export type MapName = "centroid" | "energy";

export type Selection =
  | { kind: "instrument"; index: number; point: [number, number] }
  | { kind: "point"; point: [number, number] }
  | { kind: "morph"; a: number; b: number; lam: number; point: [number, number] };

export interface Marker {
  name: string;
  point: [number, number];
  pixel: [number, number];
}

export interface SpaceView {
  background: Matrix | null;
  mapName: MapName;
  resolution: number;
  bounds: Bounds;
  markers: Marker[];
  selection: Selection | null;
  selectedPixel: [number, number] | null;
  morphPixels: [[number, number], [number, number]] | null;
}

export interface View {
  renderSpace(space: SpaceView): void;
  showError(message: string): void;
  clearError(): void;
  showResult(result: SynthesizeResult, vocoder: string): void;
  playWav(wav: ArrayBuffer): void;
  setBusy(busy: boolean): void;
  showMidiName(name: string | null): void;
}

export interface SynthesisApi {
  embeddings(): Promise<EmbeddingsInfo>;
  grid(map: MapName): Promise<Matrix>;
  synthesize(body: SynthesizeBody, signal?: AbortSignal): Promise<SynthesizeResult>;
}

export const DEBOUNCE_MS = 250;
const DEFAULT_RESOLUTION = 320;

export class AppController {
  private info: EmbeddingsInfo | null = null;
  private background: Matrix | null = null;
  private bounds: Bounds | null = null;
  private mapName: MapName = "centroid";
  private selection: Selection | null = null;
  private midi: { b64: string; name: string } | null = null;
  playing = false;

  private readonly scheduler: AuditionScheduler<SynthesizeBody, SynthesizeResult>;

  constructor(
    private readonly api: SynthesisApi,
    private readonly view: View,
    debounceMs: number = DEBOUNCE_MS,
  ) {
    this.scheduler = new AuditionScheduler(
      debounceMs,
      (body, signal) => {
        this.view.setBusy(true);
        return this.api.synthesize(body, signal);
      },
      (result, body) => {
        this.view.setBusy(false);
        this.view.clearError();
        this.view.showResult(result, body.vocoder ?? "preview");
        if (result.wav) {
          this.view.playWav(result.wav);
          this.playing = true;
        }
      },
      (err) => {
        this.view.setBusy(false);
        this.view.showError(errorText(err));
      },
    );
  }

  /** Fetch the space (also the retry handler for the error banner). */
  async boot(): Promise<void> {
    this.view.clearError();
    try {
      this.info = await this.api.embeddings();
      this.bounds = gridBounds(this.info.coordinates);
    } catch (err) {
      this.view.showError(`failed to load embedding space: ${errorText(err)}`);
      return;
    }
    await this.fetchGrid();
    this.render();
  }

  private async fetchGrid(): Promise<void> {
    try {
      this.background = await this.api.grid(this.mapName);
    } catch (err) {
      this.background = null;
      this.view.showError(`grid map unavailable: ${errorText(err)}`);
    }
  }

  get resolution(): number {
    return this.background?.rows ?? DEFAULT_RESOLUTION;
  }

  markers(): Marker[] {
    if (!this.info || !this.bounds) return [];
    return this.info.coordinates.map((point, i) => ({
      name: this.info!.names[i],
      point,
      pixel: embeddingToPixel(point, this.resolution, this.bounds!),
    }));
  }

  spaceView(): SpaceView | null {
    if (!this.info || !this.bounds) return null;
    const sel = this.selection;
    let morphPixels: [[number, number], [number, number]] | null = null;
    if (sel?.kind === "morph") {
      morphPixels = [
        embeddingToPixel(this.info.coordinates[sel.a], this.resolution, this.bounds),
        embeddingToPixel(this.info.coordinates[sel.b], this.resolution, this.bounds),
      ];
    }
    return {
      background: this.background,
      mapName: this.mapName,
      resolution: this.resolution,
      bounds: this.bounds,
      markers: this.markers(),
      selection: sel,
      selectedPixel: sel ? embeddingToPixel(sel.point, this.resolution, this.bounds) : null,
      morphPixels,
    };
  }

  private render(): void {
    const space = this.spaceView();
    if (space) this.view.renderSpace(space);
  }

  /** Marker click: select the instrument's exact learned coordinates. */
  selectInstrument(index: number): void {
    if (!this.info) return;
    const point = this.info.coordinates[index];
    if (!point) return;
    this.selection = { kind: "instrument", index, point };
    this.render();
    this.scheduler.request(this.body("preview"));
  }

  /** Background click: select the grid cell center under the pixel. */
  selectPixel(cx: number, cy: number): void {
    if (!this.bounds) return;
    const point = clampToBounds(pixelToEmbedding(cx, cy, this.resolution, this.bounds), this.bounds);
    this.selection = { kind: "point", point };
    this.render();
    this.scheduler.request(this.body("preview"));
  }

  setMorph(a: number, b: number, lam = 0.5): void {
    if (!this.info) return;
    this.applyMorph(a, b, lam);
  }

  /** Drag along the morph path: same endpoints, new mix. */
  setMorphLambda(lam: number): void {
    if (this.selection?.kind !== "morph") return;
    this.applyMorph(this.selection.a, this.selection.b, lam);
  }

  private applyMorph(a: number, b: number, lam: number): void {
    if (!this.info) return;
    const clamped = Math.min(1, Math.max(0, lam));
    const point = lerp(this.info.coordinates[a], this.info.coordinates[b], clamped);
    this.selection = { kind: "morph", a, b, lam: clamped, point };
    this.render();
    this.scheduler.request(this.body("preview"));
  }

  /** Swap the heatmap; markers and selection stay where they are. */
  async setMap(map: MapName): Promise<void> {
    if (map === this.mapName) return;
    this.mapName = map;
    await this.fetchGrid();
    this.render();
  }

  loadMidi(bytes: Uint8Array, name: string): void {
    this.midi = { b64: bytesToBase64(bytes), name };
    this.view.showMidiName(name);
    if (this.selection) this.scheduler.request(this.body("preview"));
  }

  /** Back to the service's built-in probe phrase. */
  clearMidi(): void {
    this.midi = null;
    this.view.showMidiName(null);
    if (this.selection) this.scheduler.request(this.body("preview"));
  }

  /** Explicit slow-path render; skips the debounce but stays latest-wins. */
  renderWithWavenet(seed = 0): void {
    if (!this.selection) return;
    this.scheduler.fire(this.body("wavenet", seed));
  }

  markPlaybackEnded(): void {
    this.playing = false;
  }

  private body(vocoder: "preview" | "wavenet", seed = 0): SynthesizeBody {
    const sel = this.selection;
    if (!sel) throw new Error("nothing selected");
    const body: SynthesizeBody = { vocoder, seed };
    if (this.midi) body.midi_b64 = this.midi.b64;
    if (sel.kind === "instrument") body.instrument = sel.index;
    else if (sel.kind === "point") body.embedding = sel.point;
    else body.morph = { a: sel.a, b: sel.b, lam: sel.lam };
    return body;
  }
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) return formatDetail(err.detail);
  if (err instanceof Error) return err.message;
  return String(err);
}
