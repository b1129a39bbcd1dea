/** Editor state machine.  All mutations go through methods that keep the
 * invariants: the shape stays simple during edits (invalid edits are
 * flagged, not applied to requests), and at most one solve job runs. */

import { Point, Pose, applyPose, identityPose, isSimplePolygon } from './geometry.js';
import { CropPreview, SolutionDoc } from './api.js';

export interface Snapshot {
  vertices: Point[];
  pose: Pose;
}

export class EditorState {
  tileset: string | null = null;
  vertices: Point[] = [];
  pose: Pose = identityPose();
  closed = false;
  crop: CropPreview | null = null;
  solution: SolutionDoc | null = null;
  previousSolution: SolutionDoc | null = null;
  solveInFlight = false;
  error: string | null = null;
  private undoStack: Snapshot[] = [];

  /** Shape in world coordinates (pose applied). */
  get worldVertices(): Point[] {
    return applyPose(this.vertices, this.pose);
  }

  get valid(): boolean {
    return this.closed && isSimplePolygon(this.worldVertices);
  }

  get canSolve(): boolean {
    return this.valid && this.tileset !== null && !this.solveInFlight;
  }

  private snapshot() {
    this.undoStack.push({
      vertices: this.vertices.map((v) => [...v] as Point),
      pose: { ...this.pose },
    });
    if (this.undoStack.length > 100) this.undoStack.shift();
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.vertices = prev.vertices;
    this.pose = prev.pose;
    this.refreshValidity();
    return true;
  }

  addVertex(p: Point) {
    if (this.closed) return;
    this.snapshot();
    this.vertices.push(p);
    this.error = null;
  }

  closeShape(): boolean {
    if (this.vertices.length < 3) {
      this.error = 'need at least 3 vertices';
      return false;
    }
    this.snapshot();
    this.closed = true;
    this.refreshValidity();
    return this.valid;
  }

  moveVertex(index: number, p: Point) {
    this.snapshot();
    this.vertices[index] = p;
    this.refreshValidity();
  }

  setPose(pose: Partial<Pose>) {
    this.snapshot();
    this.pose = { ...this.pose, ...pose };
    this.refreshValidity();
  }

  replaceShape(vertices: Point[]) {
    this.snapshot();
    this.vertices = vertices.map((v) => [...v] as Point);
    this.pose = identityPose();
    this.closed = true;
    this.refreshValidity();
  }

  clearShape() {
    this.snapshot();
    this.vertices = [];
    this.closed = false;
    this.crop = null;
    this.error = null;
  }

  refreshValidity() {
    if (this.closed && !isSimplePolygon(this.worldVertices)) {
      this.error = 'shape is self-intersecting';
    } else if (this.error === 'shape is self-intersecting') {
      this.error = null;
    }
  }

  beginSolve(): boolean {
    if (!this.canSolve) return false;
    this.solveInFlight = true;
    return true;
  }

  finishSolve(solution: SolutionDoc | null, error: string | null = null) {
    if (solution) {
      this.previousSolution = this.solution;
      this.solution = solution;
    }
    this.error = error;
    this.solveInFlight = false;
  }
}
