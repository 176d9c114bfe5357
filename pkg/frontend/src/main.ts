/** DOM wiring: renders the controller's view model onto the page. */

import { ApiClient } from "./api.js";
import type { SynthesizeResult } from "./api.js";
import { AppController } from "./controller.js";
import type { MapName, SpaceView, View } from "./controller.js";
import { matrixToRgba } from "./heatmap.js";
import { melToRgba } from "./spectrogram.js";

const CANVAS_SCALE = 2;
const MARKER_HIT_RADIUS = 8;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class DomView implements View {
  private readonly space = el<HTMLCanvasElement>("space");
  private readonly spectrogram = el<HTMLCanvasElement>("spectrogram");
  private readonly banner = el<HTMLDivElement>("banner");
  private readonly bannerText = el<HTMLSpanElement>("banner-text");
  private readonly timings = el<HTMLDivElement>("timings");
  private readonly busy = el<HTMLSpanElement>("busy");
  private readonly midiName = el<HTMLSpanElement>("midi-name");
  private readonly audio = el<HTMLAudioElement>("player");
  private backdrop: HTMLCanvasElement | null = null;
  private wavUrl: string | null = null;
  lastSpace: SpaceView | null = null;

  renderSpace(view: SpaceView): void {
    this.lastSpace = view;
    const res = view.resolution;
    if (this.space.width !== res) {
      this.space.width = res;
      this.space.height = res;
      this.space.style.width = `${res * CANVAS_SCALE}px`;
      this.space.style.height = `${res * CANVAS_SCALE}px`;
      this.backdrop = null;
    }
    const ctx = this.space.getContext("2d")!;
    if (view.background) {
      if (!this.backdrop) {
        this.backdrop = document.createElement("canvas");
        this.backdrop.width = view.background.cols;
        this.backdrop.height = view.background.rows;
      }
      const image = new ImageData(matrixToRgba(view.background), view.background.cols, view.background.rows);
      this.backdrop.getContext("2d")!.putImageData(image, 0, 0);
      ctx.drawImage(this.backdrop, 0, 0);
    } else {
      ctx.fillStyle = "#202020";
      ctx.fillRect(0, 0, res, res);
    }

    if (view.morphPixels) {
      const [[ax, ay], [bx, by]] = view.morphPixels;
      ctx.strokeStyle = "rgba(255,255,255,0.85)";
      ctx.lineWidth = 1.5;
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
      ctx.setLineDash([]);
    }

    ctx.font = "10px sans-serif";
    ctx.textBaseline = "middle";
    for (const marker of view.markers) {
      const [x, y] = marker.pixel;
      ctx.fillStyle = "#ffffff";
      ctx.strokeStyle = "#000000";
      ctx.beginPath();
      ctx.arc(x, y, 4, 0, 2 * Math.PI);
      ctx.fill();
      ctx.stroke();
      ctx.fillStyle = "#ffffff";
      ctx.strokeStyle = "rgba(0,0,0,0.7)";
      ctx.lineWidth = 2;
      ctx.strokeText(marker.name, x + 7, y);
      ctx.fillText(marker.name, x + 7, y);
      ctx.lineWidth = 1;
    }

    if (view.selectedPixel) {
      const [x, y] = view.selectedPixel;
      ctx.strokeStyle = "#ff5252";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(x - 9, y);
      ctx.lineTo(x + 9, y);
      ctx.moveTo(x, y - 9);
      ctx.lineTo(x, y + 9);
      ctx.stroke();
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }

  showError(message: string): void {
    this.bannerText.textContent = message;
    this.banner.style.display = "flex";
  }

  clearError(): void {
    this.banner.style.display = "none";
  }

  showResult(result: SynthesizeResult, vocoder: string): void {
    this.spectrogram.width = result.mel.cols;
    this.spectrogram.height = result.mel.rows;
    const ctx = this.spectrogram.getContext("2d")!;
    ctx.putImageData(new ImageData(melToRgba(result.mel), result.mel.cols, result.mel.rows), 0, 0);
    const parts = Object.entries(result.timings_ms).map(([stage, ms]) => `${stage} ${ms.toFixed(1)} ms`);
    this.timings.textContent = `${vocoder}: ${parts.join(" | ")} (${result.frames} frames)`;
  }

  playWav(wav: ArrayBuffer): void {
    if (this.wavUrl) URL.revokeObjectURL(this.wavUrl);
    this.wavUrl = URL.createObjectURL(new Blob([wav], { type: "audio/wav" }));
    this.audio.src = this.wavUrl;
    void this.audio.play().catch(() => {
      /* autoplay may require a user gesture; the element stays loaded */
    });
  }

  setBusy(busy: boolean): void {
    this.busy.style.visibility = busy ? "visible" : "hidden";
  }

  showMidiName(name: string | null): void {
    this.midiName.textContent = name ?? "built-in probe phrase";
  }
}

function canvasPixel(canvas: HTMLCanvasElement, ev: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * canvas.width,
    ((ev.clientY - rect.top) / rect.height) * canvas.height,
  ];
}

/** Fraction of the way from a to b for the projection of p onto segment ab. */
function projectLambda(p: [number, number], a: [number, number], b: [number, number]): number {
  const abx = b[0] - a[0];
  const aby = b[1] - a[1];
  const norm = abx * abx + aby * aby;
  if (norm === 0) return 0;
  return ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / norm;
}

function start(): void {
  const view = new DomView();
  const controller = new AppController(new ApiClient(), view);

  const space = el<HTMLCanvasElement>("space");
  const morphA = el<HTMLSelectElement>("morph-a");
  const morphB = el<HTMLSelectElement>("morph-b");
  const morphLam = el<HTMLInputElement>("morph-lam");
  let draggingMorph = false;

  space.addEventListener("mousedown", (ev) => {
    const pixel = canvasPixel(space, ev);
    const current = view.lastSpace;
    if (!current) return;
    for (let i = 0; i < current.markers.length; i++) {
      const [mx, my] = current.markers[i].pixel;
      if (Math.hypot(pixel[0] - mx, pixel[1] - my) <= MARKER_HIT_RADIUS) {
        controller.selectInstrument(i);
        return;
      }
    }
    if (current.morphPixels) {
      const lam = projectLambda(pixel, current.morphPixels[0], current.morphPixels[1]);
      if (lam >= -0.05 && lam <= 1.05) {
        draggingMorph = true;
        controller.setMorphLambda(lam);
        morphLam.value = String(Math.min(1, Math.max(0, lam)));
        return;
      }
    }
    controller.selectPixel(pixel[0], pixel[1]);
  });
  space.addEventListener("mousemove", (ev) => {
    if (!draggingMorph || !view.lastSpace?.morphPixels) return;
    const lam = projectLambda(canvasPixel(space, ev), view.lastSpace.morphPixels[0], view.lastSpace.morphPixels[1]);
    controller.setMorphLambda(lam);
    morphLam.value = String(Math.min(1, Math.max(0, lam)));
  });
  window.addEventListener("mouseup", () => {
    draggingMorph = false;
  });

  el<HTMLButtonElement>("retry").addEventListener("click", () => void controller.boot());
  for (const map of ["centroid", "energy"] as MapName[]) {
    el<HTMLInputElement>(`map-${map}`).addEventListener("change", () => void controller.setMap(map));
  }

  el<HTMLButtonElement>("morph-go").addEventListener("click", () => {
    controller.setMorph(Number(morphA.value), Number(morphB.value), Number(morphLam.value));
  });
  morphLam.addEventListener("input", () => controller.setMorphLambda(Number(morphLam.value)));

  el<HTMLInputElement>("midi-file").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    controller.loadMidi(new Uint8Array(await file.arrayBuffer()), file.name);
  });
  el<HTMLButtonElement>("midi-clear").addEventListener("click", () => {
    el<HTMLInputElement>("midi-file").value = "";
    controller.clearMidi();
  });

  el<HTMLButtonElement>("render-wavenet").addEventListener("click", () => {
    controller.renderWithWavenet(Number(el<HTMLInputElement>("wavenet-seed").value) || 0);
  });

  el<HTMLAudioElement>("player").addEventListener("ended", () => controller.markPlaybackEnded());

  void controller.boot().then(() => {
    const markers = controller.markers();
    for (const sel of [morphA, morphB]) {
      sel.innerHTML = "";
      markers.forEach((marker, i) => {
        const opt = document.createElement("option");
        opt.value = String(i);
        opt.textContent = marker.name;
        sel.appendChild(opt);
      });
    }
    if (markers.length > 1) morphB.value = "1";
  });
}

document.addEventListener("DOMContentLoaded", start);
