// Typed client for the label API (see docs/api.md in the repo root).

export interface QueryPayload {
  id: string;
  env: string;
  segment_length: number;
  issued_at: number;
  left: [number, number][];
  right: [number, number][];
}

export type Choice = "left" | "right" | "equal" | "skip";

export interface StatusSnapshot {
  step: number;
  labels_used: number;
  budget: number;
  latest_return: number | null;
  pending_queries: number;
  running: boolean;
}

export type SubmitResult = "accepted" | "conflict" | "not_found";

export interface LabelApi {
  nextQuery(): Promise<QueryPayload | null>;
  submitLabel(id: string, choice: Choice): Promise<SubmitResult>;
  status(): Promise<StatusSnapshot>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** HTTP implementation; `fetchImpl` is injectable for tests. */
export class HttpLabelApi implements LabelApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  async nextQuery(): Promise<QueryPayload | null> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/queries/next`);
    if (resp.status === 204) return null;
    if (!resp.ok) throw new Error(`queries/next failed: ${resp.status}`);
    return (await resp.json()) as QueryPayload;
  }

  async submitLabel(id: string, choice: Choice): Promise<SubmitResult> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ id, choice }),
    });
    if (resp.status === 409) return "conflict";
    if (resp.status === 404) return "not_found";
    if (!resp.ok) throw new Error(`labels failed: ${resp.status}`);
    return "accepted";
  }

  async status(): Promise<StatusSnapshot> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/status`);
    if (!resp.ok) throw new Error(`status failed: ${resp.status}`);
    return (await resp.json()) as StatusSnapshot;
  }
}

/** Maps a submission choice to the stored preference label (left clip is
 * the first segment of the pair, so preferring it means y = 0). */
export function choiceToLabel(choice: Choice): number | null {
  switch (choice) {
    case "left":
      return 0.0;
    case "right":
      return 1.0;
    case "equal":
      return 0.5;
    case "skip":
      return null;
  }
}
