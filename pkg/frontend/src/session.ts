// Labeling session state machine: one displayed query at a time, at most
// one submission in flight, network failures retried with backoff.

import { Choice, LabelApi, QueryPayload, StatusSnapshot } from "./api.js";
import { ClipPair } from "./playback.js";

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class Session {
  current: QueryPayload | null = null;
  clips: ClipPair | null = null;
  status: StatusSnapshot | null = null;
  submissionInFlight = false;
  banner: string | null = null;
  retryDelayMs = BACKOFF_START_MS;

  constructor(private readonly api: LabelApi) {}

  /** Fetch the next query if none is displayed.  Returns true when a new
   * query became available. */
  async pollQuery(): Promise<boolean> {
    if (this.current !== null) return false;
    try {
      const query = await this.api.nextQuery();
      this.noteSuccess();
      if (query === null) return false;
      this.current = query;
      this.clips = new ClipPair(query.left, query.right);
      return true;
    } catch (err) {
      this.noteFailure(err);
      return false;
    }
  }

  /** Submit a choice for the displayed query.  No-op without a displayed
   * query or while a submission is in flight, so rapid repeated input
   * produces exactly one POST per query. */
  async submit(choice: Choice): Promise<boolean> {
    if (this.current === null || this.submissionInFlight) return false;
    const id = this.current.id;
    this.submissionInFlight = true;
    try {
      const result = await this.api.submitLabel(id, choice);
      this.noteSuccess();
      if (result === "conflict" || result === "not_found") {
        this.banner = `query ${id}: ${result}; fetching next`;
      }
      return result === "accepted";
    } catch (err) {
      this.noteFailure(err);
      return false;
    } finally {
      // Whatever happened, this query is done locally; poll a fresh one.
      this.current = null;
      this.clips = null;
      this.submissionInFlight = false;
    }
  }

  async pollStatus(): Promise<void> {
    try {
      this.status = await this.api.status();
      this.noteSuccess();
    } catch (err) {
      this.noteFailure(err);
    }
  }

  advanceClips(frames = 1): void {
    this.clips?.advance(frames);
  }

  private noteSuccess(): void {
    this.banner = null;
    this.retryDelayMs = BACKOFF_START_MS;
  }

  private noteFailure(err: unknown): void {
    this.banner = `connection trouble: ${String(err)}; retrying`;
    this.retryDelayMs = Math.min(this.retryDelayMs * 2, BACKOFF_MAX_MS);
  }
}
