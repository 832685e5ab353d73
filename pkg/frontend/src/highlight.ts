// Client-side highlighting of features shared between the registration and a
// candidate. Tokenization mirrors the server: case-folded maximal runs of
// letters/digits, underscores excluded. Purely advisory.

export interface Segment {
  text: string;
  shared: boolean;
}

const TOKEN_RE = /[^\W_]+/gu;

export function segmentText(text: string, sharedFeatures: readonly string[]): Segment[] {
  const shared = new Set(sharedFeatures.map((f) => f.toLowerCase()));
  const segments: Segment[] = [];
  let last = 0;
  for (const match of text.matchAll(TOKEN_RE)) {
    const start = match.index ?? 0;
    const token = match[0];
    const isShared = shared.has(token.toLowerCase());
    if (!isShared) continue;
    if (start > last) segments.push({ text: text.slice(last, start), shared: false });
    segments.push({ text: token, shared: true });
    last = start + token.length;
  }
  if (last < text.length) segments.push({ text: text.slice(last), shared: false });
  return segments;
}

/** Shared features that never occur in the text (concept ids, for example). */
export function unmatchedFeatures(text: string, sharedFeatures: readonly string[]): string[] {
  const present = new Set(
    Array.from(text.matchAll(TOKEN_RE), (m) => m[0].toLowerCase()),
  );
  return sharedFeatures.filter((f) => !present.has(f.toLowerCase()));
}
