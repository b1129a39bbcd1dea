/** Typed client for the tiling service; fetch is injectable for tests. */

import { Point } from './geometry.js';

export interface TileSetSummary {
  name: string;
  prototiles?: { vertices: number[][]; color: string }[];
  symmetry?: { theta: number; dx: number; dy: number };
  ready?: boolean;
  has_weights?: boolean;
  error?: string;
}

export interface CropPreview {
  candidate_count: number;
  candidate_outlines: number[][][];
}

export interface JobState {
  id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  progress: { round?: number; crop_index?: number; best_coverage?: number };
  error: string | null;
}

export interface SolutionDoc {
  tileset: string;
  seed: number;
  tiles: { prototile: number; vertices: number[][]; color: string }[];
  metrics: {
    coverage: number;
    holes: number;
    rounds: number;
    tiles: number;
    contact_length: number;
  };
  region: { outer: number[][]; holes: number[][][] };
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class Client {
  constructor(
    private base = '',
    private fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `server unreachable: ${err}`);
    }
    const body = await resp.text();
    if (!resp.ok) {
      let detail = body;
      try {
        detail = JSON.parse(body).detail ?? body;
      } catch {
        /* plain-text error */
      }
      throw new ApiError(resp.status, String(detail));
    }
    return JSON.parse(body) as T;
  }

  listTilesets(): Promise<TileSetSummary[]> {
    return this.request('/api/tilesets');
  }

  crop(tileset: string, polygon: Point[]): Promise<CropPreview> {
    return this.request('/api/crop', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ tileset, polygon }),
    });
  }

  startSolve(req: {
    tileset: string;
    polygon: Point[];
    policy: string;
    runs: number;
    seed: number;
  }): Promise<{ job_id: string }> {
    return this.request('/api/solve', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(req),
    });
  }

  jobState(id: string): Promise<JobState> {
    return this.request(`/api/jobs/${id}`);
  }

  jobSolution(id: string): Promise<SolutionDoc> {
    return this.request(`/api/jobs/${id}/solution`);
  }

  /** Poll a job until done/failed; reports progress along the way. */
  async pollJob(
    id: string,
    onProgress?: (state: JobState) => void,
    intervalMs = 150,
    timeoutMs = 120_000,
  ): Promise<SolutionDoc> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const state = await this.jobState(id);
      onProgress?.(state);
      if (state.state === 'done') {
        return this.jobSolution(id);
      }
      if (state.state === 'failed') {
        throw new ApiError(500, state.error ?? 'solve failed');
      }
      if (Date.now() > deadline) {
        throw new ApiError(0, 'solve timed out');
      }
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }
}
