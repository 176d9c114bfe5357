/** Debounced, latest-wins dispatch for synthesis requests.
 *
 * Interactions funnel through request(): a trailing-edge debounce collapses
 * rapid clicks or drags into one call, and every issued call carries a
 * generation number. Only the newest generation may apply its result, so a
 * slow stale response can never overwrite (or play over) a newer one. The
 * previous in-flight request is aborted when superseded.
 */
export class AuditionScheduler<Q, R> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private generation = 0;
  private inflight: AbortController | null = null;

  constructor(
    private readonly delayMs: number,
    private readonly run: (req: Q, signal: AbortSignal) => Promise<R>,
    private readonly apply: (res: R, req: Q) => void,
    private readonly fail: (err: unknown, req: Q) => void = () => {},
  ) {}

  /** Schedule a request after the debounce window, replacing any pending one. */
  request(req: Q): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire(req);
    }, this.delayMs);
  }

  /** Issue immediately (used for the explicit slow-path render button). */
  fire(req: Q): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const gen = ++this.generation;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.run(req, controller.signal).then(
      (res) => {
        if (gen === this.generation) this.apply(res, req);
      },
      (err) => {
        if (gen === this.generation && !controller.signal.aborted) this.fail(err, req);
      },
    );
  }

  /** Drop the pending timer and invalidate anything in flight. */
  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.generation++;
    this.inflight?.abort();
    this.inflight = null;
  }
}
