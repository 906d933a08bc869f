// Span layout for the document panel. Offsets here are Unicode scalar
// values, same as the server's.

export type SpanLike = {
  id: string;
  start: number;
  end: number;
};

export type Segment = {
  start: number;
  end: number;
  covering: string[]; // ids of every span containing this segment
};

// Cut the document at every span boundary so each segment has a constant
// set of covering spans. Segments with no covering span are included so
// the concatenation of all segments is the whole document.
export const segmentSpans = (length: number, spans: SpanLike[]): Segment[] => {
  const cuts = new Set<number>([0, length]);
  for (const s of spans) {
    cuts.add(Math.min(Math.max(s.start, 0), length));
    cuts.add(Math.min(Math.max(s.end, 0), length));
  }
  const sorted = [...cuts].sort((a, b) => a - b);
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < sorted.length; i += 1) {
    const start = sorted[i]!;
    const end = sorted[i + 1]!;
    if (end <= start) continue;
    const covering = spans
      .filter((s) => s.start <= start && end <= s.end)
      .map((s) => s.id);
    segments.push({ start, end, covering });
  }
  return segments;
};

// Greedy interval coloring: overlapping spans never share a lane, so each
// gets its own underline row and nested spans stack instead of occluding.
// Outer spans sort first (start ascending, longer first) and therefore
// take the shallower lanes.
export const assignLanes = (spans: SpanLike[]): Map<string, number> => {
  const sorted = [...spans].sort(
    (a, b) => a.start - b.start || b.end - a.end || a.id.localeCompare(b.id)
  );
  const lanes = new Map<string, number>();
  for (const s of sorted) {
    const used = new Set<number>();
    for (const t of sorted) {
      if (t === s) break;
      if (t.start < s.end && s.start < t.end) used.add(lanes.get(t.id)!);
    }
    let lane = 0;
    while (used.has(lane)) lane += 1;
    lanes.set(s.id, lane);
  }
  return lanes;
};
