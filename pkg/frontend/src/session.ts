/** Client-side session state machine.
 *
 * Owns the single outstanding step and guarantees a response is sent at most
 * once: an in-flight guard swallows double-clicks, and a server conflict
 * (someone answered first, e.g. a second tab) re-syncs to the server's
 * outstanding item instead of re-posting.
 */

import { ApiError, ServiceApi, Step } from "./api.js";

export type SubmitOutcome = "advanced" | "completed" | "resynced" | "ignored";

export class ClientSession {
  current: Step;
  itemsCompleted = 0;
  private inFlight = false;

  private constructor(
    private readonly api: ServiceApi,
    readonly sessionId: string,
    firstStep: Step,
  ) {
    this.current = firstStep;
  }

  static async start(
    api: ServiceApi,
    studyId: string,
    demographics?: Record<string, string>,
  ): Promise<ClientSession> {
    const created = await api.createSession(studyId, demographics);
    return new ClientSession(api, created.session_id, created.step);
  }

  /** Re-attach to an existing session (page refresh): ask the server. */
  static async resume(api: ServiceApi, sessionId: string): Promise<ClientSession> {
    return new ClientSession(api, sessionId, await api.getNext(sessionId));
  }

  get finished(): boolean {
    return this.current.kind === "result";
  }

  get progress(): number {
    return this.current.kind === "item" ? this.current.item.progress : this.finished ? 1 : 0;
  }

  /** Submit the answer for the outstanding item and advance. */
  async submitAnswer(value: number): Promise<SubmitOutcome> {
    if (this.inFlight || this.current.kind !== "item") {
      return "ignored";
    }
    const itemId = this.current.item.item_id;
    this.inFlight = true;
    try {
      const snapshot = await this.api.postResponse(this.sessionId, itemId, value);
      this.itemsCompleted = snapshot.items_completed;
      this.current = snapshot.next;
      return snapshot.completed ? "completed" : "advanced";
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // already answered elsewhere: adopt the server's view, never re-post
        this.current = await this.api.getNext(this.sessionId);
        return "resynced";
      }
      // network hiccup: the response may or may not have landed, so re-sync
      // through the idempotent step endpoint rather than posting again
      this.current = await this.api.getNext(this.sessionId);
      return "resynced";
    } finally {
      this.inFlight = false;
    }
  }

  async submitDemographics(payload: Record<string, string>): Promise<SubmitOutcome> {
    if (this.inFlight || this.current.kind !== "demographics") {
      return "ignored";
    }
    this.inFlight = true;
    try {
      const snapshot = await this.api.postDemographics(this.sessionId, payload);
      this.current = snapshot.next;
      return "advanced";
    } finally {
      this.inFlight = false;
    }
  }
}
