import { describe, expect, it } from 'vitest';
import { EditorState } from '../src/state.js';
import { Point } from '../src/geometry.js';

function triangleState(): EditorState {
  const state = new EditorState();
  state.tileset = 'square';
  state.addVertex([0, 0]);
  state.addVertex([4, 0]);
  state.addVertex([2, 3]);
  return state;
}

describe('shape editing', () => {
  it('closing a triangle makes it valid and solvable', () => {
    const state = triangleState();
    expect(state.canSolve).toBe(false);
    expect(state.closeShape()).toBe(true);
    expect(state.valid).toBe(true);
    expect(state.canSolve).toBe(true);
  });

  it('cannot close with fewer than 3 vertices', () => {
    const state = new EditorState();
    state.addVertex([0, 0]);
    state.addVertex([1, 0]);
    expect(state.closeShape()).toBe(false);
    expect(state.error).toMatch(/3 vertices/);
  });

  it('dragging a vertex into self-intersection flags an error and blocks solve', () => {
    const state = new EditorState();
    state.tileset = 'square';
    for (const p of [[0, 0], [4, 0], [4, 4], [0, 4]] as Point[]) state.addVertex(p);
    state.closeShape();
    expect(state.valid).toBe(true);
    state.moveVertex(2, [-2, 2]); // crosses the opposite edge
    expect(state.valid).toBe(false);
    expect(state.error).toMatch(/self-intersecting/);
    expect(state.canSolve).toBe(false);
  });

  it('undo restores the previous valid shape', () => {
    const state = triangleState();
    state.closeShape();
    state.moveVertex(0, [100, 100]);
    const moved = state.vertices[0];
    expect(moved).toEqual([100, 100]);
    expect(state.undo()).toBe(true);
    expect(state.vertices[0]).toEqual([0, 0]);
    expect(state.valid).toBe(true);
  });

  it('pose scaling applies to the shape, not the tiles', () => {
    const state = triangleState();
    state.closeShape();
    state.setPose({ scale: 2 });
    const [x0, , x1] = [
      Math.min(...state.worldVertices.map((p) => p[0])),
      0,
      Math.max(...state.worldVertices.map((p) => p[0])),
    ];
    expect(x1 - x0).toBeCloseTo(8);
  });
});

describe('solve lifecycle', () => {
  it('allows exactly one solve in flight', () => {
    const state = triangleState();
    state.closeShape();
    expect(state.beginSolve()).toBe(true);
    expect(state.beginSolve()).toBe(false);
    state.finishSolve(null, 'boom');
    expect(state.error).toBe('boom');
    expect(state.canSolve).toBe(true);
  });

  it('keeps the previous solution for comparison', () => {
    const state = triangleState();
    state.closeShape();
    const docA = { seed: 1 } as never;
    const docB = { seed: 2 } as never;
    state.beginSolve();
    state.finishSolve(docA);
    state.beginSolve();
    state.finishSolve(docB);
    expect(state.solution).toBe(docB);
    expect(state.previousSolution).toBe(docA);
  });
});
