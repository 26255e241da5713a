/** Heads-up display: frame time, disparity to the nearest MPI, and the
 * epsilon-fallback coverage fraction. */

export class Hud {
  private frames = 0;
  private windowStart = performance.now();
  private fps = 0;
  private coverageFallback = 0;
  private disparityPx = 0;

  constructor(private readonly element: HTMLElement) {}

  tick(): void {
    this.frames += 1;
    const now = performance.now();
    if (now - this.windowStart >= 500) {
      this.fps = (this.frames * 1000) / (now - this.windowStart);
      this.frames = 0;
      this.windowStart = now;
      this.render();
    }
  }

  setDisparity(px: number): void {
    this.disparityPx = px;
  }

  setCoverageFallback(fraction: number): void {
    this.coverageFallback = fraction;
    this.render();
  }

  setMessage(text: string): void {
    this.element.textContent = text;
  }

  private render(): void {
    this.element.textContent =
      `${this.fps.toFixed(0)} fps | d_max to nearest MPI ` +
      `${this.disparityPx.toFixed(1)} px | fallback ` +
      `${(this.coverageFallback * 100).toFixed(1)}%`;
  }
}
