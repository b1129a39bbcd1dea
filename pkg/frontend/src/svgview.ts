/** SVG viewport: renders the drawn shape, candidate outlines, and solution
 * tiles in model coordinates (y up), with wheel zoom and drag pan via the
 * viewBox.  The server's solution geometry is drawn verbatim. */

import { Point, bounds } from './geometry.js';
import { CropPreview, SolutionDoc } from './api.js';

const SVGNS = 'http://www.w3.org/2000/svg';

export interface ViewBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function zoomViewBox(vb: ViewBox, factor: number, cx: number, cy: number): ViewBox {
  const w = vb.w * factor;
  const h = vb.h * factor;
  return {
    x: cx - (cx - vb.x) * factor,
    y: cy - (cy - vb.y) * factor,
    w,
    h,
  };
}

export function panViewBox(vb: ViewBox, dx: number, dy: number): ViewBox {
  return { ...vb, x: vb.x + dx, y: vb.y + dy };
}

function pathFrom(points: number[][]): string {
  return 'M ' + points.map(([x, y]) => `${x} ${-y}`).join(' L ') + ' Z';
}

export class SvgView {
  readonly svg: SVGSVGElement;
  private layers: Record<string, SVGGElement> = {};
  viewBox: ViewBox = { x: -10, y: -10, w: 20, h: 20 };

  constructor(host: HTMLElement) {
    this.svg = document.createElementNS(SVGNS, 'svg') as SVGSVGElement;
    this.svg.setAttribute('class', 'canvas');
    for (const name of ['candidates', 'shape', 'previous', 'tiles', 'handles']) {
      const g = document.createElementNS(SVGNS, 'g') as SVGGElement;
      g.setAttribute('data-layer', name);
      this.layers[name] = g;
      this.svg.appendChild(g);
    }
    host.appendChild(this.svg);
    this.applyViewBox();
  }

  applyViewBox() {
    const { x, y, w, h } = this.viewBox;
    this.svg.setAttribute('viewBox', `${x} ${y} ${w} ${h}`);
  }

  /** Convert a client event position to model coordinates (y up). */
  toModel(clientX: number, clientY: number): Point {
    const rect = this.svg.getBoundingClientRect();
    const fx = (clientX - rect.left) / rect.width;
    const fy = (clientY - rect.top) / rect.height;
    return [this.viewBox.x + fx * this.viewBox.w,
            -(this.viewBox.y + fy * this.viewBox.h)];
  }

  fitTo(points: Point[], margin = 0.2) {
    if (!points.length) return;
    const [x0, y0, x1, y1] = bounds(points);
    const w = Math.max(x1 - x0, 1e-6);
    const h = Math.max(y1 - y0, 1e-6);
    const m = margin * Math.max(w, h);
    this.viewBox = { x: x0 - m, y: -(y1 + m), w: w + 2 * m, h: h + 2 * m };
    this.applyViewBox();
  }

  private clear(layer: string) {
    const g = this.layers[layer];
    while (g.firstChild) g.removeChild(g.firstChild);
  }

  private addPath(layer: string, d: string, cls: string) {
    const el = document.createElementNS(SVGNS, 'path');
    el.setAttribute('d', d);
    el.setAttribute('class', cls);
    this.layers[layer].appendChild(el);
    return el;
  }

  drawShape(world: Point[], closed: boolean, invalid: boolean) {
    this.clear('shape');
    if (world.length < 2) return;
    const d = closed
      ? pathFrom(world)
      : 'M ' + world.map(([x, y]) => `${x} ${-y}`).join(' L ');
    this.addPath('shape', d, invalid ? 'shape invalid' : 'shape');
  }

  drawHandles(world: Point[], onDrag: (index: number, p: Point) => void) {
    this.clear('handles');
    const r = this.viewBox.w / 120;
    world.forEach(([x, y], index) => {
      const c = document.createElementNS(SVGNS, 'circle');
      c.setAttribute('cx', String(x));
      c.setAttribute('cy', String(-y));
      c.setAttribute('r', String(r));
      c.setAttribute('class', 'handle');
      c.addEventListener('pointerdown', (down) => {
        down.stopPropagation();
        const move = (ev: PointerEvent) =>
          onDrag(index, this.toModel(ev.clientX, ev.clientY));
        const up = () => {
          window.removeEventListener('pointermove', move);
          window.removeEventListener('pointerup', up);
        };
        window.addEventListener('pointermove', move);
        window.addEventListener('pointerup', up);
      });
      this.layers['handles'].appendChild(c);
    });
  }

  drawCandidates(crop: CropPreview | null) {
    this.clear('candidates');
    if (!crop) return;
    for (const outline of crop.candidate_outlines) {
      this.addPath('candidates', pathFrom(outline), 'candidate');
    }
  }

  drawSolution(doc: SolutionDoc | null, layer = 'tiles') {
    this.clear(layer);
    if (!doc) return;
    for (const tile of doc.tiles) {
      const el = this.addPath(layer, pathFrom(tile.vertices),
                              layer === 'tiles' ? 'tile' : 'tile ghost');
      el.setAttribute('fill', tile.color);
    }
  }

  attachZoomPan() {
    this.svg.addEventListener('wheel', (ev) => {
      ev.preventDefault();
      const [mx, my] = this.toModel(ev.clientX, ev.clientY);
      const factor = ev.deltaY > 0 ? 1.15 : 1 / 1.15;
      this.viewBox = zoomViewBox(this.viewBox, factor, mx, -my);
      this.applyViewBox();
    }, { passive: false });
    let panning: Point | null = null;
    this.svg.addEventListener('pointerdown', (ev) => {
      if (ev.button === 1 || ev.shiftKey) {
        panning = [ev.clientX, ev.clientY];
        ev.preventDefault();
      }
    });
    window.addEventListener('pointermove', (ev) => {
      if (!panning) return;
      const rect = this.svg.getBoundingClientRect();
      const dx = ((ev.clientX - panning[0]) / rect.width) * this.viewBox.w;
      const dy = ((ev.clientY - panning[1]) / rect.height) * this.viewBox.h;
      this.viewBox = panViewBox(this.viewBox, -dx, -dy);
      this.applyViewBox();
      panning = [ev.clientX, ev.clientY];
    });
    window.addEventListener('pointerup', () => { panning = null; });
  }
}
