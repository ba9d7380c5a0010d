/** Bootstrap: wire the session state machine to the DOM.
 *
 * Reads a descriptor from the <script id="catlab-config"> json block
 * ({"baseUrl": ..., "studyId": ..., "language": ...}), resumes the session
 * recorded in sessionStorage when the page is refreshed mid-test, and
 * otherwise starts a fresh one.
 */

import { ServiceApi, Step } from "./api.js";
import { stringsFor, Strings } from "./i18n.js";
import { renderCompletion, renderDemographics, renderItem } from "./render.js";
import { ClientSession } from "./session.js";

interface Descriptor {
  baseUrl: string;
  studyId: string;
  language?: string;
}

const STORAGE_KEY = "catlab-session-id";

export function readDescriptor(doc: Document): Descriptor {
  const block = doc.getElementById("catlab-config");
  if (!block?.textContent) {
    throw new Error("missing catlab-config descriptor");
  }
  return JSON.parse(block.textContent) as Descriptor;
}

export class App {
  private strings: Strings;

  constructor(
    private readonly doc: Document,
    private readonly mount: HTMLElement,
    private readonly api: ServiceApi,
    language = "en",
  ) {
    this.strings = stringsFor(language);
  }

  async run(studyId: string, storage: Storage | null = null): Promise<ClientSession> {
    const storedId = storage?.getItem(STORAGE_KEY) ?? null;
    let session: ClientSession;
    if (storedId) {
      session = await ClientSession.resume(this.api, storedId);
    } else {
      session = await ClientSession.start(this.api, studyId);
      storage?.setItem(STORAGE_KEY, session.sessionId);
    }
    this.show(session, session.current);
    return session;
  }

  private show(session: ClientSession, step: Step): void {
    this.mount.replaceChildren();
    if (step.kind === "item") {
      const language = step.item.language;
      this.strings = stringsFor(language);
      this.mount.appendChild(
        renderItem(this.doc, step.item, this.strings, (value) => {
          void session.submitAnswer(value).then(() => this.show(session, session.current));
        }),
      );
    } else if (step.kind === "demographics") {
      this.mount.appendChild(
        renderDemographics(this.doc, step.fields, this.strings, (payload) => {
          void session.submitDemographics(payload).then(() => this.show(session, session.current));
        }),
      );
    } else {
      this.mount.appendChild(renderCompletion(this.doc, this.strings, session.itemsCompleted));
    }
  }
}

export async function bootstrap(doc: Document, storage: Storage | null): Promise<ClientSession> {
  const descriptor = readDescriptor(doc);
  const mount = doc.getElementById("app");
  if (!mount) {
    throw new Error("missing #app mount point");
  }
  const app = new App(doc, mount, new ServiceApi(descriptor.baseUrl), descriptor.language);
  return app.run(descriptor.studyId, storage);
}

declare const window: (Window & typeof globalThis) | undefined;

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", () => {
    void bootstrap(document, window.sessionStorage);
  });
}
