/** Client-side polygon helpers: validation for live editing feedback only.
 * The server's geometry is authoritative for all solving. */

export type Point = [number, number];

export interface Pose {
  rotation: number;
  scale: number;
  tx: number;
  ty: number;
}

export const identityPose = (): Pose => ({ rotation: 0, scale: 1, tx: 0, ty: 0 });

function orient(a: Point, b: Point, c: Point): number {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

function onSegment(a: Point, b: Point, p: Point): boolean {
  return (
    Math.min(a[0], b[0]) - 1e-12 <= p[0] && p[0] <= Math.max(a[0], b[0]) + 1e-12 &&
    Math.min(a[1], b[1]) - 1e-12 <= p[1] && p[1] <= Math.max(a[1], b[1]) + 1e-12
  );
}

export function segmentsIntersect(p1: Point, p2: Point, q1: Point, q2: Point): boolean {
  const d1 = orient(q1, q2, p1);
  const d2 = orient(q1, q2, p2);
  const d3 = orient(p1, p2, q1);
  const d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 === 0 && onSegment(q1, q2, p1)) return true;
  if (d2 === 0 && onSegment(q1, q2, p2)) return true;
  if (d3 === 0 && onSegment(p1, p2, q1)) return true;
  if (d4 === 0 && onSegment(p1, p2, q2)) return true;
  return false;
}

/** Simple-polygon test: no two non-adjacent edges may touch. */
export function isSimplePolygon(vertices: Point[]): boolean {
  const n = vertices.length;
  if (n < 3) return false;
  for (let i = 0; i < n; i++) {
    const a1 = vertices[i];
    const a2 = vertices[(i + 1) % n];
    if (Math.hypot(a2[0] - a1[0], a2[1] - a1[1]) < 1e-9) return false;
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) continue;
      if (segmentsIntersect(a1, a2, vertices[j], vertices[(j + 1) % n])) {
        return false;
      }
    }
  }
  return Math.abs(polygonArea(vertices)) > 1e-9;
}

export function polygonArea(vertices: Point[]): number {
  let area = 0;
  const n = vertices.length;
  for (let i = 0; i < n; i++) {
    const [x1, y1] = vertices[i];
    const [x2, y2] = vertices[(i + 1) % n];
    area += x1 * y2 - x2 * y1;
  }
  return area / 2;
}

export function centroid(vertices: Point[]): Point {
  let cx = 0, cy = 0;
  for (const [x, y] of vertices) { cx += x; cy += y; }
  return [cx / vertices.length, cy / vertices.length];
}

/** Apply the editor pose (scale+rotate about the centroid, then translate);
 * tiles themselves never scale, only the drawn shape does. */
export function applyPose(vertices: Point[], pose: Pose): Point[] {
  const [cx, cy] = centroid(vertices);
  const cos = Math.cos(pose.rotation);
  const sin = Math.sin(pose.rotation);
  return vertices.map(([x, y]) => {
    const dx = (x - cx) * pose.scale;
    const dy = (y - cy) * pose.scale;
    return [
      cx + dx * cos - dy * sin + pose.tx,
      cy + dx * sin + dy * cos + pose.ty,
    ] as Point;
  });
}

export function bounds(vertices: Point[]): [number, number, number, number] {
  let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
  for (const [x, y] of vertices) {
    x0 = Math.min(x0, x); y0 = Math.min(y0, y);
    x1 = Math.max(x1, x); y1 = Math.max(y1, y);
  }
  return [x0, y0, x1, y1];
}
