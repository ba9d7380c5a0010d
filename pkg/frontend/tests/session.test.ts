import { describe, expect, it } from "vitest";

import { ApiError, FetchLike, ItemView, ServiceApi } from "../src/api.js";
import { ClientSession } from "../src/session.js";

/** In-memory stand-in for the service: one session, scripted items, the same
 * outstanding-item semantics (duplicates conflict, next is idempotent). */
class FakeService {
  outstanding = 0;
  answered: number[] = [];
  postDelay: Promise<void> | null = null;
  total = 3;

  private itemView(): ItemView {
    return {
      item_id: `item-${this.outstanding}`,
      prompt: `Prompt ${this.outstanding}`,
      categories: 2,
      labels: null,
      position: this.answered.length + 1,
      max_items: this.total,
      progress: this.answered.length / this.total,
      language: "en",
    };
  }

  private step() {
    return this.answered.length >= this.total
      ? { kind: "result", url: "/sessions/s1/result" }
      : { kind: "item", item: this.itemView() };
  }

  fetch: FetchLike = async (url, init) => {
    const respond = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), { status });
    if (url.endsWith("/next")) {
      return respond(200, this.step());
    }
    if (url.endsWith("/responses")) {
      if (this.postDelay) {
        await this.postDelay;
      }
      const payload = JSON.parse(String(init?.body));
      if (payload.item_id !== `item-${this.outstanding}`) {
        return respond(409, {
          detail: { code: "conflict", outstanding: this.itemView() },
        });
      }
      this.answered.push(payload.value);
      this.outstanding += 1;
      return respond(200, {
        items_completed: this.answered.length,
        progress: this.answered.length / this.total,
        completed: this.answered.length >= this.total,
        next: this.step(),
      });
    }
    if (url.endsWith("/sessions")) {
      return respond(201, { session_id: "s1", token: "s1.t", step: this.step() });
    }
    throw new Error(`unexpected url ${url}`);
  };
}

function connect(service: FakeService) {
  return new ServiceApi("http://fake", service.fetch);
}

describe("ClientSession", () => {
  it("advances through items to completion", async () => {
    const service = new FakeService();
    const session = await ClientSession.start(connect(service), "st-1");
    expect(session.current.kind).toBe("item");
    expect(await session.submitAnswer(1)).toBe("advanced");
    expect(await session.submitAnswer(0)).toBe("advanced");
    expect(await session.submitAnswer(1)).toBe("completed");
    expect(session.finished).toBe(true);
    expect(service.answered).toEqual([1, 0, 1]);
  });

  it("swallows a double-click while a submit is in flight", async () => {
    const service = new FakeService();
    let release!: () => void;
    service.postDelay = new Promise((resolve) => (release = resolve));
    const session = await ClientSession.start(connect(service), "st-1");
    const first = session.submitAnswer(1);
    const second = session.submitAnswer(1); // double-click
    release();
    expect(await second).toBe("ignored");
    expect(await first).toBe("advanced");
    expect(service.answered).toEqual([1]); // exactly one recorded
  });

  it("resyncs to the server's outstanding item on a conflict", async () => {
    const service = new FakeService();
    const api = connect(service);
    const session = await ClientSession.start(api, "st-1");
    // another tab answers the outstanding item behind this client's back
    await api.postResponse("s1", "item-0", 0);
    const outcome = await session.submitAnswer(1);
    expect(outcome).toBe("resynced");
    expect(session.current.kind).toBe("item");
    if (session.current.kind === "item") {
      expect(session.current.item.item_id).toBe("item-1");
    }
    expect(service.answered).toEqual([0]); // the stale answer was not re-posted
  });

  it("resumes from the idempotent step endpoint", async () => {
    const service = new FakeService();
    const api = connect(service);
    const first = await ClientSession.start(api, "st-1");
    await first.submitAnswer(1);
    const refreshed = await ClientSession.resume(api, "s1");
    expect(refreshed.current).toEqual(first.current);
  });

  it("exposes api errors with their machine-readable code", async () => {
    const service = new FakeService();
    const api = connect(service);
    await api.postResponse("s1", "item-0", 1);
    const error = await api.postResponse("s1", "item-0", 1).catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(409);
    expect(error.code).toBe("conflict");
    expect(error.outstanding?.item_id).toBe("item-1");
  });
});
