/**
 * Deterministic force-directed layout.
 *
 * A fixed seed drives every random choice, so the same (nodes, edges, seed)
 * always produces the same positions; snapshot tests rely on this. Nodes
 * that already have positions keep them and only new nodes are placed and
 * relaxed against the rest.
 */

import type { ViewEdge } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

const WIDTH = 800;
const HEIGHT = 600;
const ITERATIONS = 120;
const REPULSION = 6000;
const SPRING = 0.02;
const SPRING_LENGTH = 140;
const DAMPING = 0.85;

/** mulberry32: tiny seeded PRNG, stable across platforms. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function layoutPositions(
  nodeIds: string[],
  edges: ViewEdge[],
  seed: number,
  existing: Map<string, Point> = new Map(),
): Map<string, Point> {
  const ids = [...nodeIds].sort();
  const rand = mulberry32(seed);
  const positions = new Map<string, Point>();
  const pinned = new Set<string>();

  for (const id of ids) {
    const kept = existing.get(id);
    if (kept) {
      positions.set(id, { x: kept.x, y: kept.y });
      pinned.add(id);
    } else {
      // initial placement on a jittered circle, in sorted-id order
      const angle = rand() * 2 * Math.PI;
      const radius = 100 + rand() * 150;
      positions.set(id, {
        x: WIDTH / 2 + radius * Math.cos(angle),
        y: HEIGHT / 2 + radius * Math.sin(angle),
      });
    }
  }

  const velocity = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));
  const adjacency: Array<[string, string]> = edges
    .filter((e) => positions.has(e.src) && positions.has(e.dst))
    .map((e) => [e.src, e.dst]);

  for (let step = 0; step < ITERATIONS; step += 1) {
    const force = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));
    for (let i = 0; i < ids.length; i += 1) {
      for (let j = i + 1; j < ids.length; j += 1) {
        const a = positions.get(ids[i])!;
        const b = positions.get(ids[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        let distSq = dx * dx + dy * dy;
        if (distSq < 1e-6) {
          // deterministic nudge for coincident points
          dx = 0.1 * (i - j);
          dy = 0.1;
          distSq = dx * dx + dy * dy;
        }
        const magnitude = REPULSION / distSq;
        const dist = Math.sqrt(distSq);
        const fx = (dx / dist) * magnitude;
        const fy = (dy / dist) * magnitude;
        const fa = force.get(ids[i])!;
        const fb = force.get(ids[j])!;
        fa.x += fx;
        fa.y += fy;
        fb.x -= fx;
        fb.y -= fy;
      }
    }
    for (const [src, dst] of adjacency) {
      const a = positions.get(src)!;
      const b = positions.get(dst)!;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1e-3);
      const stretch = SPRING * (dist - SPRING_LENGTH);
      const fa = force.get(src)!;
      const fb = force.get(dst)!;
      fa.x += (dx / dist) * stretch;
      fa.y += (dy / dist) * stretch;
      fb.x -= (dx / dist) * stretch;
      fb.y -= (dy / dist) * stretch;
    }
    for (const id of ids) {
      if (pinned.has(id)) continue;
      const v = velocity.get(id)!;
      const f = force.get(id)!;
      v.x = (v.x + f.x) * DAMPING;
      v.y = (v.y + f.y) * DAMPING;
      const p = positions.get(id)!;
      p.x = Math.min(Math.max(p.x + v.x, 20), WIDTH - 20);
      p.y = Math.min(Math.max(p.y + v.y, 20), HEIGHT - 20);
    }
  }

  for (const point of positions.values()) {
    point.x = Math.round(point.x * 100) / 100;
    point.y = Math.round(point.y * 100) / 100;
  }
  return positions;
}
