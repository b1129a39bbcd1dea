/** Application wiring: tile-set picker, shape editor, crop preview loop,
 * solve jobs with progress, solution rendering and comparison. */

import { Client, ApiError, SolutionDoc } from './api.js';
import { debounce } from './debounce.js';
import { EditorState } from './state.js';
import { SvgView } from './svgview.js';

const state = new EditorState();
const client = new Client('');

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const banner = el<HTMLDivElement>('banner');
const metrics = el<HTMLDivElement>('metrics');
const candidateInfo = el<HTMLSpanElement>('candidate-info');
const solveBtn = el<HTMLButtonElement>('solve');
const resolveBtn = el<HTMLButtonElement>('resolve');
const compareToggle = el<HTMLInputElement>('compare');
const tilesetSelect = el<HTMLSelectElement>('tileset');
const view = new SvgView(el('viewport'));
view.attachZoomPan();

function setBanner(text: string | null, kind: 'error' | 'info' = 'error') {
  banner.textContent = text ?? '';
  banner.className = text ? `banner ${kind}` : 'banner hidden';
}

function redraw() {
  const world = state.worldVertices;
  view.drawShape(world, state.closed, state.closed && !state.valid);
  view.drawHandles(world.length === state.vertices.length ? state.vertices : [],
    (index, p) => {
      state.moveVertex(index, p);
      onShapeEdited();
    });
  view.drawCandidates(state.crop);
  view.drawSolution(state.solution);
  view.drawSolution(compareToggle.checked ? state.previousSolution : null,
                    'previous');
  solveBtn.disabled = !state.canSolve;
  resolveBtn.disabled = !state.solution || !state.canSolve;
  if (state.error) {
    setBanner(state.error);
  } else {
    setBanner(null);
  }
}

const requestCrop = debounce(async () => {
  if (!state.valid || !state.tileset) return;
  try {
    state.crop = await client.crop(state.tileset, state.worldVertices);
    candidateInfo.textContent =
      `${state.crop.candidate_count} candidate placements`;
  } catch (err) {
    state.crop = null;
    candidateInfo.textContent = '';
    setBanner(err instanceof ApiError ? err.message : String(err));
  }
  redraw();
}, 300);

function onShapeEdited() {
  state.solution = null;
  if (state.valid) {
    requestCrop();
  } else {
    state.crop = null;
    candidateInfo.textContent = '';
  }
  redraw();
}

function showMetrics(doc: SolutionDoc | null, elapsedMs: number | null) {
  if (!doc) {
    metrics.textContent = '';
    return;
  }
  const m = doc.metrics;
  const time = elapsedMs === null ? '' : ` | ${(elapsedMs / 1000).toFixed(2)}s`;
  metrics.textContent =
    `coverage ${(m.coverage * 100).toFixed(1)}% | holes ${m.holes} | ` +
    `${m.tiles} tiles | ${m.rounds} rounds${time} | seed ${doc.seed}`;
}

async function solve(seed: number) {
  if (!state.beginSolve()) return;
  redraw();
  const started = performance.now();
  setBanner('solving…', 'info');
  try {
    const { job_id } = await client.startSolve({
      tileset: state.tileset!,
      polygon: state.worldVertices,
      policy: policyFor(state.tileset!),
      runs: 8,
      seed,
    });
    const doc = await client.pollJob(job_id, (job) => {
      const p = job.progress;
      setBanner(`solving… round ${p.round ?? 0}` +
        (p.best_coverage ? `, best ${(p.best_coverage * 100).toFixed(1)}%` : ''),
        'info');
    });
    state.finishSolve(doc);
    showMetrics(doc, performance.now() - started);
    setBanner(null);
  } catch (err) {
    state.finishSolve(null,
      err instanceof ApiError ? err.message : String(err));
  }
  redraw();
}

let tilesetsWithWeights = new Set<string>();

function policyFor(name: string): string {
  return tilesetsWithWeights.has(name) ? 'gnn' : 'greedy';
}

async function loadTilesets() {
  try {
    const sets = await client.listTilesets();
    tilesetSelect.innerHTML = '';
    for (const summary of sets) {
      if (summary.error || !summary.ready) continue;
      if (summary.has_weights) tilesetsWithWeights.add(summary.name);
      const option = document.createElement('option');
      option.value = summary.name;
      option.textContent = summary.name +
        (summary.has_weights ? '' : ' (greedy only)');
      tilesetSelect.appendChild(option);
    }
    if (tilesetSelect.options.length === 0) {
      setBanner('no solvable tile sets configured on the server');
      return;
    }
    state.tileset = tilesetSelect.value;
  } catch (err) {
    setBanner(err instanceof ApiError ? err.message : String(err));
  }
}

function wireEvents() {
  tilesetSelect.addEventListener('change', () => {
    state.tileset = tilesetSelect.value;
    onShapeEdited();
  });

  view.svg.addEventListener('pointerdown', (ev) => {
    if (ev.button !== 0 || ev.shiftKey || state.closed) return;
    state.addVertex(view.toModel(ev.clientX, ev.clientY));
    redraw();
  });
  view.svg.addEventListener('dblclick', () => {
    if (!state.closed && state.closeShape()) onShapeEdited();
    redraw();
  });

  el<HTMLButtonElement>('close-shape').addEventListener('click', () => {
    if (state.closeShape()) onShapeEdited();
    redraw();
  });
  el<HTMLButtonElement>('clear').addEventListener('click', () => {
    state.clearShape();
    state.solution = null;
    showMetrics(null, null);
    redraw();
  });
  el<HTMLButtonElement>('undo').addEventListener('click', () => {
    if (state.undo()) onShapeEdited();
  });
  el<HTMLButtonElement>('demo').addEventListener('click', () => {
    state.replaceShape([[0, 0], [7, 0], [7, 4], [3.5, 6.5], [0, 4]]);
    view.fitTo(state.worldVertices);
    onShapeEdited();
  });

  const rotation = el<HTMLInputElement>('rotation');
  const scale = el<HTMLInputElement>('scale');
  rotation.addEventListener('input', () => {
    state.setPose({ rotation: (Number(rotation.value) * Math.PI) / 180 });
    onShapeEdited();
  });
  scale.addEventListener('input', () => {
    state.setPose({ scale: Number(scale.value) });
    onShapeEdited();
  });

  solveBtn.addEventListener('click', () =>
    solve(Math.floor(Math.random() * 2 ** 31)));
  resolveBtn.addEventListener('click', () =>
    solve(Math.floor(Math.random() * 2 ** 31)));
  compareToggle.addEventListener('change', redraw);

  window.addEventListener('keydown', (ev) => {
    if ((ev.ctrlKey || ev.metaKey) && ev.key === 'z') {
      ev.preventDefault();
      if (state.undo()) onShapeEdited();
    }
  });
}

loadTilesets().then(() => {
  wireEvents();
  redraw();
});
