/**
 * Minimal deterministic SVG scaffolding: linear scales, tick generation,
 * axes, and safe text nodes. Numbers are always emitted with toFixed so a
 * rerun over the same data produces byte-identical markup.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

/** Round ticks covering the domain: step is 1/2/5 × 10^k, at most `count`+1 ticks. */
export function niceTicks([lo, hi]: [number, number], count = 5): number[] {
  if (hi <= lo) return [lo];
  const rawStep = (hi - lo) / Math.max(1, count);
  const power = Math.floor(Math.log10(rawStep));
  const base = Math.pow(10, power);
  let step = base * 10;
  for (const multiple of [1, 2, 5]) {
    if (base * multiple >= rawStep) {
      step = base * multiple;
      break;
    }
  }
  const ticks: number[] = [];
  for (let tick = Math.ceil(lo / step) * step; tick <= hi + step * 1e-9; tick += step) {
    ticks.push(Number(tick.toFixed(10)));
  }
  return ticks;
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function fmt(value: number): string {
  return value.toFixed(2);
}

/** Compact label for tick values (trims trailing zeros). */
export function tickLabel(value: number): string {
  return Number(value.toFixed(6)).toString();
}

export const STRATEGY_ORDER = ["greedy", "gossip", "data", "network", "contextual"] as const;

const PALETTE: Record<string, string> = {
  greedy: "#7f7f7f",
  gossip: "#1f77b4",
  data: "#2ca02c",
  network: "#ff7f0e",
  contextual: "#d62728",
};

const FALLBACK_COLORS = ["#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf"];

export function strategyColor(strategy: string, index: number): string {
  return PALETTE[strategy] ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length]!;
}

/** Strategies in canonical order first, then any extras alphabetically. */
export function orderStrategies(strategies: Iterable<string>): string[] {
  const present = new Set(strategies);
  const ordered: string[] = [];
  for (const name of STRATEGY_ORDER) {
    if (present.has(name)) {
      ordered.push(name);
      present.delete(name);
    }
  }
  ordered.push(...[...present].sort());
  return ordered;
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 480,
  margin: { top: 40, right: 160, bottom: 56, left: 64 },
};

export function plotArea(frame: Frame): { x0: number; x1: number; y0: number; y1: number } {
  return {
    x0: frame.margin.left,
    x1: frame.width - frame.margin.right,
    y0: frame.height - frame.margin.bottom,
    y1: frame.margin.top,
  };
}

export function xAxis(frame: Frame, scale: Scale, ticks: number[], label: string): string {
  const { x0, x1, y0 } = plotArea(frame);
  const parts = [`<line x1="${fmt(x0)}" y1="${fmt(y0)}" x2="${fmt(x1)}" y2="${fmt(y0)}" stroke="#333"/>`];
  for (const tick of ticks) {
    const x = scale(tick);
    parts.push(`<line x1="${fmt(x)}" y1="${fmt(y0)}" x2="${fmt(x)}" y2="${fmt(y0 + 5)}" stroke="#333"/>`);
    parts.push(
      `<text x="${fmt(x)}" y="${fmt(y0 + 20)}" text-anchor="middle" font-size="12">${escapeXml(tickLabel(tick))}</text>`,
    );
  }
  const cx = (x0 + x1) / 2;
  parts.push(
    `<text x="${fmt(cx)}" y="${fmt(y0 + 42)}" text-anchor="middle" font-size="13">${escapeXml(label)}</text>`,
  );
  return parts.join("\n");
}

export function yAxis(frame: Frame, scale: Scale, ticks: number[], label: string): string {
  const { x0, y0, y1 } = plotArea(frame);
  const parts = [`<line x1="${fmt(x0)}" y1="${fmt(y0)}" x2="${fmt(x0)}" y2="${fmt(y1)}" stroke="#333"/>`];
  for (const tick of ticks) {
    const y = scale(tick);
    parts.push(`<line x1="${fmt(x0 - 5)}" y1="${fmt(y)}" x2="${fmt(x0)}" y2="${fmt(y)}" stroke="#333"/>`);
    parts.push(
      `<text x="${fmt(x0 - 8)}" y="${fmt(y + 4)}" text-anchor="end" font-size="12">${escapeXml(tickLabel(tick))}</text>`,
    );
  }
  const cy = (y0 + y1) / 2;
  parts.push(
    `<text x="${fmt(x0 - 44)}" y="${fmt(cy)}" text-anchor="middle" font-size="13" transform="rotate(-90 ${fmt(x0 - 44)} ${fmt(cy)})">${escapeXml(label)}</text>`,
  );
  return parts.join("\n");
}

export interface LegendEntry {
  label: string;
  color: string;
}

export function legend(frame: Frame, entries: LegendEntry[]): string {
  const { x1, y1 } = plotArea(frame);
  const parts: string[] = [];
  entries.forEach((entry, index) => {
    const y = y1 + 10 + index * 20;
    parts.push(
      `<rect class="legend-swatch" x="${fmt(x1 + 12)}" y="${fmt(y - 9)}" width="14" height="14" fill="${entry.color}"/>`,
    );
    parts.push(
      `<text class="legend-label" x="${fmt(x1 + 32)}" y="${fmt(y + 3)}" font-size="13">${escapeXml(entry.label)}</text>`,
    );
  });
  return parts.join("\n");
}

export function document(frame: Frame, title: string, body: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}" font-family="sans-serif">`,
    `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`,
    `<text x="${fmt(frame.width / 2)}" y="24" text-anchor="middle" font-size="15">${escapeXml(title)}</text>`,
    body,
    `</svg>`,
    ``,
  ].join("\n");
}
