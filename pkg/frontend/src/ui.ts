// Single-page authoring studio: type a sentence, pick a sampling method,
// compare candidates and their temperature/novelty traces, accept or edit
// one, and regenerate from it. The server is never mutated; every request
// carries an explicit seed so any candidate can be reproduced.

import { ApiClient, ApiClientError } from "./api.js";
import {
  acceptCandidate,
  newSession,
  setError,
  setResponse,
  type SessionState,
} from "./state.js";
import { renderTraceSvg, traceChartModel, TraceShapeError } from "./trace.js";
import type { Candidate, MethodsPayload } from "./types.js";

type Attrs = Record<string, string | ((e: Event) => void)>;

function el(doc: Document, tag: string, attrs: Attrs = {}, ...children: (string | Node)[]): HTMLElement {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") node.addEventListener(key.slice(2), value);
    else if (key === "className") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

// override form fields exposed per method family; everything else keeps
// its server-side default
const OVERRIDE_FIELDS: Record<string, string[]> = {
  greedy: ["max_len"],
  beam: ["beam_width", "max_len"],
  random: ["base_temperature", "top_k", "max_len"],
  parabola_b2: ["target_total_novelty", "c_const", "top_k", "expansion_factor", "tau_floor", "tau_ceiling"],
  parabola_c: ["target_total_novelty", "b2_const", "top_k", "expansion_factor", "tau_floor", "tau_ceiling"],
  exponential: ["target_total_novelty", "exp_kappa", "exp_alpha", "top_k", "expansion_factor"],
  windowed: ["target_total_novelty", "window_size", "top_k", "expansion_factor"],
};

export class StudioApp {
  session: SessionState = newSession();
  methods: MethodsPayload = { methods: [], defaults: {} };
  private inflight: AbortController | null = null;
  private requestSerial = 0;

  readonly input: HTMLTextAreaElement;
  readonly methodSelect: HTMLSelectElement;
  readonly paramsForm: HTMLElement;
  readonly seedInput: HTMLInputElement;
  readonly countInput: HTMLInputElement;
  readonly expandButton: HTMLButtonElement;
  readonly banner: HTMLElement;
  readonly candidatesBox: HTMLElement;
  readonly historyBox: HTMLElement;

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
    readonly doc: Document = root.ownerDocument,
  ) {
    const d = this.doc;
    this.input = el(d, "textarea", { id: "input", rows: "2", placeholder: "a short sentence to expand" }) as HTMLTextAreaElement;
    this.methodSelect = el(d, "select", { id: "method", onchange: () => this.onMethodChange() }) as HTMLSelectElement;
    this.paramsForm = el(d, "div", { id: "params", className: "params" });
    this.seedInput = el(d, "input", { id: "seed", type: "number", value: "0" }) as HTMLInputElement;
    this.countInput = el(d, "input", { id: "count", type: "number", value: "3", min: "1", max: "10" }) as HTMLInputElement;
    this.expandButton = el(d, "button", { id: "expand", onclick: () => void this.expandNow() }, "expand") as HTMLButtonElement;
    this.banner = el(d, "div", { id: "banner", className: "banner hidden" });
    this.candidatesBox = el(d, "div", { id: "candidates" });
    this.historyBox = el(d, "div", { id: "history" });

    root.append(
      el(d, "h1", {}, "kernelsmith studio"),
      this.banner,
      el(d, "div", { className: "controls" },
        el(d, "label", {}, "input", this.input),
        el(d, "label", {}, "method", this.methodSelect),
        this.paramsForm,
        el(d, "label", {}, "seed", this.seedInput),
        el(d, "label", {}, "candidates", this.countInput),
        this.expandButton,
      ),
      this.candidatesBox,
      el(d, "h2", {}, "accepted history"),
      this.historyBox,
    );
  }

  async init(): Promise<void> {
    try {
      this.methods = await this.api.getMethods();
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
      return;
    }
    this.methodSelect.replaceChildren(
      ...this.methods.methods.map((m) =>
        el(this.doc, "option", m === this.session.method ? { value: m, selected: "selected" } : { value: m }, m),
      ),
    );
    this.renderParams();
  }

  private onMethodChange(): void {
    this.session = { ...this.session, method: this.methodSelect.value, overrides: {} };
    this.renderParams();
  }

  /** Parameter inputs generated from the server's defaults payload.

      Methods without a curated field list (new server-side curves) fall
      back to every numeric default, so they are steerable untouched. */
  renderParams(): void {
    const fields =
      OVERRIDE_FIELDS[this.session.method] ??
      Object.keys(this.methods.defaults).filter(
        (k) => k !== "method" && k !== "seed" && typeof this.methods.defaults[k] !== "string",
      );
    this.paramsForm.replaceChildren(
      ...fields.map((name) => {
        const fallback = name === "target_total_novelty" ? "" : String(this.methods.defaults[name] ?? "");
        const input = el(this.doc, "input", {
          type: "number",
          step: "any",
          id: `param-${name}`,
          value: fallback,
          placeholder: "auto",
          onchange: (e) => {
            const raw = (e.target as HTMLInputElement).value;
            const overrides = { ...this.session.overrides };
            if (raw === "" || raw === String(this.methods.defaults[name] ?? "")) delete overrides[name];
            else overrides[name] = Number(raw);
            this.session = { ...this.session, overrides };
          },
        });
        return el(this.doc, "label", { className: "param" }, name, input);
      }),
    );
  }

  showError(message: string): void {
    this.session = setError(this.session, message);
    this.banner.textContent = message;
    this.banner.className = "banner error";
  }

  clearError(): void {
    this.banner.textContent = "";
    this.banner.className = "banner hidden";
  }

  /** Request candidates; a newer click supersedes any in-flight request. */
  async expandNow(): Promise<void> {
    const sentence = this.input.value.trim();
    if (!sentence) {
      this.showError("enter a sentence first");
      return;
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const serial = ++this.requestSerial;
    this.session = {
      ...this.session,
      input: sentence,
      seed: Number(this.seedInput.value) || 0,
      candidateCount: Math.max(1, Number(this.countInput.value) || 1),
      busy: true,
    };
    this.expandButton.setAttribute("disabled", "disabled");
    try {
      const response = await this.api.expand(
        {
          sentence,
          method: this.session.method,
          candidate_count: this.session.candidateCount,
          seed: this.session.seed,
          overrides: this.session.overrides,
        },
        controller.signal,
      );
      if (serial !== this.requestSerial) return; // superseded
      this.session = setResponse(this.session, response);
      this.clearError();
      this.renderCandidates();
    } catch (err) {
      if (controller.signal.aborted || serial !== this.requestSerial) return;
      this.showError(err instanceof ApiClientError ? `${err.code}: ${err.message}` : String(err));
    } finally {
      if (serial === this.requestSerial) {
        this.expandButton.removeAttribute("disabled");
        this.session = { ...this.session, busy: false };
      }
    }
  }

  renderCandidates(): void {
    const response = this.session.response;
    if (!response) {
      this.candidatesBox.replaceChildren();
      return;
    }
    this.candidatesBox.replaceChildren(
      ...response.candidates.map((cand, i) => this.candidateCard(cand, i)),
    );
  }

  private candidateCard(cand: Candidate, index: number): HTMLElement {
    const d = this.doc;
    const metrics = `ratio ${cand.metrics.expansion_ratio.toFixed(2)} · dist-1 ${cand.metrics.dist1.toFixed(2)} · seed ${cand.seed}`;
    const card = el(d, "div", { className: "candidate", id: `candidate-${index}` });
    card.append(el(d, "p", { className: "text" }, cand.text));
    if (cand.filtered && cand.filter_reason) {
      card.append(el(d, "span", { className: "flag" }, `filtered: ${cand.filter_reason}`));
    }
    card.append(el(d, "p", { className: "metrics" }, metrics));
    try {
      const tauFloor = Number(this.methods.defaults.tau_floor ?? 0.1);
      const floor = Number(this.session.overrides.tau_floor ?? tauFloor);
      card.append(renderTraceSvg(traceChartModel(cand.trace, floor), d));
    } catch (err) {
      if (!(err instanceof TraceShapeError)) throw err;
      card.append(el(d, "p", { className: "trace-error" }, `trace unrenderable: ${err.message}`));
    }
    const editBox = el(d, "textarea", { className: "edit", rows: "2" }) as HTMLTextAreaElement;
    editBox.value = cand.text;
    card.append(
      editBox,
      el(d, "button", { className: "accept", onclick: () => this.accept(cand) }, "accept"),
      el(d, "button", { className: "accept-edited", onclick: () => this.accept(cand, editBox.value) }, "accept edited"),
      el(d, "button", { className: "reproduce", onclick: () => void this.reproduce(cand) }, "reproduce"),
    );
    return card;
  }

  /** Re-run the expansion with this candidate's own seed. */
  reproduce(cand: Candidate): Promise<void> {
    this.seedInput.value = String(cand.seed);
    this.countInput.value = "1";
    return this.expandNow();
  }

  accept(cand: Candidate, editedText?: string): void {
    this.session = acceptCandidate(this.session, cand, editedText);
    this.input.value = this.session.input;
    this.renderCandidates();
    this.renderHistory();
  }

  renderHistory(): void {
    const d = this.doc;
    this.historyBox.replaceChildren(
      ...this.session.history.map((entry, i) => {
        const item = el(d, "div", { className: "history-entry", id: `history-${i}` });
        item.append(el(d, "p", { className: "accepted" }, entry.accepted));
        if (entry.edited) {
          item.append(el(d, "p", { className: "original" }, `generated: ${entry.original}`));
        }
        item.append(el(d, "p", { className: "meta" }, `${entry.method} · seed ${entry.seed}`));
        return item;
      }),
    );
  }
}

export async function mountStudio(root: HTMLElement, baseUrl = ""): Promise<StudioApp> {
  const app = new StudioApp(root, new ApiClient(baseUrl));
  await app.init();
  return app;
}
