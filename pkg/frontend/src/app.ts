// Annotation workbench: suggestion panel on the left, document in the
// middle, tagged spans on the right. Talks to the service exclusively
// through the JSON API; refetches after every mutation.

import type {
  AnnotationInfo,
  ApiClient,
  DocumentInfo,
  LintFinding,
  SuggestionResult,
} from "./api.js";
import { ApiError, createClient } from "./api.js";
import { scalarToUtf16, utf16ToScalar, utf16OffsetIn } from "./offsets.js";
import { assignLanes, segmentSpans } from "./segments.js";

export type AppOptions = {
  baseUrl?: string;
  annotatorId?: string;
};

// Scalar offsets, like everything the server stores.
export type PendingSpan = {
  start: number;
  end: number;
  text: string;
};

const SUGGEST_PAGE = 10;
const SUGGEST_MAX = 100;

const STATUS_COLORS: Record<AnnotationInfo["status"], string> = {
  proposed: "#d97706",
  accepted: "#2e7d32",
  rejected: "#9ca3af",
};

const SHELL_HTML = `
  <header class="topbar">
    <span class="brand">concept workbench</span>
    <select data-role="doc-picker" title="document"></select>
    <label class="annotator">annotator
      <input data-role="annotator" size="8">
    </label>
    <button data-role="autotag" type="button">Auto-tag</button>
    <span data-role="health" class="health"></span>
  </header>
  <main class="panels">
    <section class="panel suggest-panel">
      <div data-role="pick-context" class="pick-context">
        Select a span in the document to see suggestions.
      </div>
      <div data-role="error" class="error" hidden></div>
      <div data-role="suggestions" class="suggestions"></div>
      <button data-role="more" type="button" hidden>More</button>
      <div class="manual-entry">
        <input data-role="manual-cuis" placeholder="CUIs, comma separated">
        <label><input type="checkbox" data-role="cui-less"> CUI-less</label>
      </div>
      <div class="picker-actions">
        <button data-role="confirm" type="button" disabled>Confirm</button>
        <button data-role="cancel" type="button" hidden>Cancel</button>
      </div>
    </section>
    <section class="panel doc-panel" data-role="doc"></section>
    <section class="panel ann-panel">
      <ul data-role="ann-list" class="ann-list"></ul>
    </section>
  </main>
`;

const parseManualCuis = (raw: string): string[] => {
  const out: string[] = [];
  for (const piece of raw.split(/[\s,]+/)) {
    const cui = piece.trim();
    if (cui && !out.includes(cui)) out.push(cui);
  }
  return out;
};

export class Workbench {
  readonly client: ApiClient;

  docs: DocumentInfo[] = [];
  doc: DocumentInfo | null = null;
  annotations: AnnotationInfo[] = [];
  pending: PendingSpan | null = null;
  editing: AnnotationInfo | null = null;
  suggestions: SuggestionResult | null = null;
  checked = new Set<string>();
  errorDetail = "";
  errorFindings: LintFinding[] = [];

  private suggestK = SUGGEST_PAGE;
  private tail: Promise<void> = Promise.resolve();

  private readonly root: HTMLElement;
  private readonly docPanel: HTMLElement;
  private readonly annList: HTMLElement;
  private readonly suggestBox: HTMLElement;
  private readonly pickContext: HTMLElement;
  private readonly errorBox: HTMLElement;
  private readonly moreBtn: HTMLButtonElement;
  private readonly confirmBtn: HTMLButtonElement;
  private readonly cancelBtn: HTMLButtonElement;
  private readonly manualInput: HTMLInputElement;
  private readonly cuiLessInput: HTMLInputElement;
  private readonly annotatorInput: HTMLInputElement;
  private readonly docPicker: HTMLSelectElement;
  private readonly healthBox: HTMLElement;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.client = createClient(options.baseUrl ?? "");
    root.innerHTML = SHELL_HTML;

    const pick = <T extends HTMLElement>(role: string): T => {
      const el = root.querySelector(`[data-role="${role}"]`);
      if (!el) throw new Error(`missing shell element ${role}`);
      return el as T;
    };
    this.docPanel = pick("doc");
    this.annList = pick("ann-list");
    this.suggestBox = pick("suggestions");
    this.pickContext = pick("pick-context");
    this.errorBox = pick("error");
    this.moreBtn = pick<HTMLButtonElement>("more");
    this.confirmBtn = pick<HTMLButtonElement>("confirm");
    this.cancelBtn = pick<HTMLButtonElement>("cancel");
    this.manualInput = pick<HTMLInputElement>("manual-cuis");
    this.cuiLessInput = pick<HTMLInputElement>("cui-less");
    this.annotatorInput = pick<HTMLInputElement>("annotator");
    this.docPicker = pick<HTMLSelectElement>("doc-picker");
    this.healthBox = pick("health");

    this.annotatorInput.value = options.annotatorId ?? "ui";
    this.wireEvents();
  }

  // Await every action started so far (tests rely on this).
  async flush(): Promise<void> {
    let t: Promise<void>;
    do {
      t = this.tail;
      await t;
    } while (t !== this.tail);
  }

  private track(work: Promise<unknown>): void {
    const settled = work.then(
      () => undefined,
      () => undefined
    );
    this.tail = this.tail.then(() => settled);
  }

  private wireEvents(): void {
    this.docPanel.addEventListener("mouseup", () => {
      this.track(this.readSelection());
    });
    this.docPanel.addEventListener("click", (ev) => {
      const seg = (ev.target as HTMLElement).closest("[data-ann]");
      if (seg) this.focusRows((seg.getAttribute("data-ann") ?? "").split(" "));
    });
    this.docPicker.addEventListener("change", () => {
      this.track(this.loadDocument(this.docPicker.value));
    });
    this.root
      .querySelector('[data-role="autotag"]')!
      .addEventListener("click", () => this.track(this.autotag()));
    this.moreBtn.addEventListener("click", () => this.track(this.more()));
    this.confirmBtn.addEventListener("click", () => this.track(this.confirm()));
    this.cancelBtn.addEventListener("click", () => this.cancelPick());
    this.suggestBox.addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      const cui = input.getAttribute("data-cui");
      if (cui) this.toggleCui(cui, input.checked);
    });
    this.manualInput.addEventListener("input", () => this.renderPicker());
    this.cuiLessInput.addEventListener("change", () => this.renderPicker());
    this.annList.addEventListener("click", (ev) => {
      const btn = (ev.target as HTMLElement).closest("[data-action]");
      if (!btn) return;
      const action = btn.getAttribute("data-action")!;
      const id = btn.getAttribute("data-id")!;
      if (action === "edit") this.track(this.beginEdit(id));
      else if (action === "delete") this.track(this.remove(id));
      else if (action === "accept") this.track(this.setStatus(id, "accepted"));
      else if (action === "reject") this.track(this.setStatus(id, "rejected"));
    });
  }

  async start(docId?: string): Promise<void> {
    try {
      const health = await this.client.health();
      this.healthBox.textContent = `${health.concepts} concepts`;
      this.docs = await this.client.listDocuments();
      this.renderDocPicker();
      const first = docId ?? this.docs[0]?.id;
      if (first) await this.loadDocument(first);
    } catch (err) {
      this.showError(err);
    }
  }

  async loadDocument(id: string): Promise<void> {
    try {
      this.doc = await this.client.getDocument(id);
      this.docPicker.value = id;
      this.cancelPick();
      await this.refreshAnnotations();
    } catch (err) {
      this.showError(err);
    }
  }

  async refreshAnnotations(): Promise<void> {
    if (!this.doc) return;
    this.annotations = await this.client.listAnnotations(this.doc.id);
    this.renderDoc();
    this.renderList();
  }

  // Turn the browser selection into a pending span, or clear the picker
  // when nothing usable is selected.
  async readSelection(): Promise<void> {
    if (!this.doc) return;
    const view = this.root.ownerDocument.defaultView;
    const sel = view ? view.getSelection() : null;
    if (!sel || sel.rangeCount === 0) return this.clearPick();
    const range = sel.getRangeAt(0);
    if (
      range.collapsed ||
      !this.docPanel.contains(range.startContainer) ||
      !this.docPanel.contains(range.endContainer)
    ) {
      return this.clearPick();
    }
    const u16Start = utf16OffsetIn(
      this.docPanel,
      range.startContainer,
      range.startOffset
    );
    const u16End = utf16OffsetIn(
      this.docPanel,
      range.endContainer,
      range.endOffset
    );
    const start = utf16ToScalar(this.doc.text, u16Start);
    const end = utf16ToScalar(this.doc.text, u16End);
    if (end <= start) return this.clearPick();
    await this.select(start, end);
  }

  // Programmatic equivalent of highlighting [start, end) in the document.
  async select(start: number, end: number): Promise<void> {
    if (!this.doc) return;
    const text = this.doc.text.slice(
      scalarToUtf16(this.doc.text, start),
      scalarToUtf16(this.doc.text, end)
    );
    this.editing = null;
    this.pending = { start, end, text };
    this.checked.clear();
    this.manualInput.value = "";
    this.cuiLessInput.checked = false;
    this.clearError();
    this.suggestK = SUGGEST_PAGE;
    await this.fetchSuggestions();
    this.renderDoc();
  }

  private async fetchSuggestions(): Promise<void> {
    const query = this.pending?.text ?? "";
    try {
      this.suggestions = await this.client.suggest(query, this.suggestK);
    } catch (err) {
      this.suggestions = null;
      this.showError(err);
    }
    this.renderPicker();
  }

  async more(): Promise<void> {
    if (!this.pending || this.suggestK >= SUGGEST_MAX) return;
    this.suggestK = Math.min(this.suggestK + SUGGEST_PAGE, SUGGEST_MAX);
    await this.fetchSuggestions();
  }

  toggleCui(cui: string, on: boolean): void {
    if (on) this.checked.add(cui);
    else this.checked.delete(cui);
    this.renderPicker();
  }

  pickedCuis(): string[] {
    const cuis = [...this.checked];
    for (const cui of parseManualCuis(this.manualInput.value)) {
      if (!cuis.includes(cui)) cuis.push(cui);
    }
    return cuis;
  }

  // POST a new annotation for the pending span, or PUT when editing. A
  // validation failure keeps the selection and inputs so nothing is lost.
  async confirm(): Promise<void> {
    if (!this.doc || !this.pending) return;
    const cuiLess = this.cuiLessInput.checked;
    const body = {
      start: this.pending.start,
      end: this.pending.end,
      cuis: cuiLess ? [] : this.pickedCuis(),
      cui_less: cuiLess,
      annotator_id: this.annotatorInput.value || "ui",
    };
    try {
      if (this.editing) await this.client.updateAnnotation(this.editing.id, body);
      else await this.client.createAnnotation(this.doc.id, body);
      this.cancelPick();
      await this.refreshAnnotations();
    } catch (err) {
      this.showError(err);
    }
  }

  // Pencil: reopen the picker prefilled with the annotation's span and CUIs.
  async beginEdit(annId: string): Promise<void> {
    const ann = this.annotations.find((a) => a.id === annId);
    if (!ann || !this.doc) return;
    this.editing = ann;
    const text = this.doc.text.slice(
      scalarToUtf16(this.doc.text, ann.start),
      scalarToUtf16(this.doc.text, ann.end)
    );
    this.pending = { start: ann.start, end: ann.end, text };
    this.checked.clear();
    this.manualInput.value = ann.cuis.join(", ");
    this.cuiLessInput.checked = ann.cui_less;
    this.clearError();
    this.suggestK = SUGGEST_PAGE;
    await this.fetchSuggestions();
    this.renderDoc();
  }

  async remove(annId: string): Promise<void> {
    try {
      await this.client.deleteAnnotation(annId);
      if (this.editing?.id === annId) this.cancelPick();
      await this.refreshAnnotations();
    } catch (err) {
      this.showError(err);
    }
  }

  async setStatus(annId: string, status: "accepted" | "rejected"): Promise<void> {
    try {
      await this.client.setStatus(annId, status);
      await this.refreshAnnotations();
    } catch (err) {
      this.showError(err);
    }
  }

  async autotag(): Promise<void> {
    if (!this.doc) return;
    try {
      await this.client.autotag(this.doc.id);
      await this.refreshAnnotations();
    } catch (err) {
      this.showError(err);
    }
  }

  cancelPick(): void {
    this.clearPick();
  }

  private clearPick(): void {
    this.pending = null;
    this.editing = null;
    this.suggestions = null;
    this.checked.clear();
    this.manualInput.value = "";
    this.cuiLessInput.checked = false;
    this.clearError();
    this.renderPicker();
    this.renderDoc();
  }

  private clearError(): void {
    this.errorDetail = "";
    this.errorFindings = [];
    this.renderError();
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError) {
      this.errorDetail = err.message;
      this.errorFindings = err.findings;
    } else {
      this.errorDetail = err instanceof Error ? err.message : String(err);
      this.errorFindings = [];
    }
    this.renderError();
  }

  private focusRows(ids: string[]): void {
    for (const li of this.annList.querySelectorAll("li")) {
      li.classList.toggle("focused", ids.includes(li.dataset["annId"] ?? ""));
    }
  }

  // ----- rendering -----

  private renderDocPicker(): void {
    this.docPicker.textContent = "";
    for (const doc of this.docs) {
      const opt = this.root.ownerDocument.createElement("option");
      opt.value = doc.id;
      opt.textContent = doc.id;
      this.docPicker.appendChild(opt);
    }
  }

  renderDoc(): void {
    this.docPanel.textContent = "";
    if (!this.doc) return;
    const docEl = this.root.ownerDocument;
    const codePoints = [...this.doc.text];
    const spans = this.annotations.map((a) => ({
      id: a.id,
      start: a.start,
      end: a.end,
    }));
    if (this.pending) {
      spans.push({
        id: "::pending",
        start: this.pending.start,
        end: this.pending.end,
      });
    }
    const lanes = assignLanes(spans);
    const byId = new Map(this.annotations.map((a) => [a.id, a]));
    for (const seg of segmentSpans(codePoints.length, spans)) {
      const el = docEl.createElement("span");
      el.textContent = codePoints.slice(seg.start, seg.end).join("");
      const annIds = seg.covering.filter((id) => id !== "::pending");
      if (annIds.length > 0) {
        el.setAttribute("data-ann", annIds.join(" "));
        el.classList.add("tagged");
        const shadows = annIds.map((id) => {
          const ann = byId.get(id)!;
          const lane = lanes.get(id)!;
          return `0 ${2 + lane * 3}px 0 0 ${STATUS_COLORS[ann.status]}`;
        });
        el.style.boxShadow = shadows.join(", ");
      }
      if (seg.covering.includes("::pending")) el.classList.add("pending-sel");
      this.docPanel.appendChild(el);
    }
  }

  private suggestionRow(s: {
    cui: string;
    preferred_name: string;
    semantic_types: string[];
  }): HTMLElement {
    const docEl = this.root.ownerDocument;
    const row = docEl.createElement("label");
    row.className = "suggestion";
    const box = docEl.createElement("input");
    box.type = "checkbox";
    box.setAttribute("data-cui", s.cui);
    box.checked = this.checked.has(s.cui);
    box.disabled = this.cuiLessInput.checked;
    const cui = docEl.createElement("code");
    cui.textContent = s.cui;
    const name = docEl.createElement("span");
    name.textContent = ` ${s.preferred_name} `;
    const types = docEl.createElement("small");
    types.textContent = s.semantic_types.join(", ");
    row.append(box, cui, name, types);
    return row;
  }

  renderPicker(): void {
    const docEl = this.root.ownerDocument;
    this.suggestBox.textContent = "";
    if (!this.pending) {
      this.pickContext.textContent =
        "Select a span in the document to see suggestions.";
      this.moreBtn.hidden = true;
      this.confirmBtn.disabled = true;
      this.cancelBtn.hidden = true;
      this.manualInput.disabled = true;
      this.cuiLessInput.disabled = true;
      return;
    }
    const verb = this.editing ? `editing ${this.editing.id}` : "tagging";
    this.pickContext.textContent =
      `${verb} "${this.pending.text}" [${this.pending.start}, ${this.pending.end})`;
    this.manualInput.disabled = this.cuiLessInput.checked;
    this.cuiLessInput.disabled = false;
    this.cancelBtn.hidden = false;

    if (this.suggestions) {
      const groups: Array<["direct matches" | "partial matches", typeof this.suggestions.direct]> = [
        ["direct matches", this.suggestions.direct],
        ["partial matches", this.suggestions.partial],
      ];
      for (const [title, items] of groups) {
        const head = docEl.createElement("div");
        head.className = "group-head";
        head.textContent = title;
        this.suggestBox.appendChild(head);
        if (items.length === 0) {
          const none = docEl.createElement("div");
          none.className = "group-empty";
          none.textContent = "none";
          this.suggestBox.appendChild(none);
        }
        for (const s of items) this.suggestBox.appendChild(this.suggestionRow(s));
      }
      const shown =
        this.suggestions.direct.length + this.suggestions.partial.length;
      this.moreBtn.hidden = !(
        shown >= this.suggestions.k && this.suggestions.k < SUGGEST_MAX
      );
    } else {
      this.moreBtn.hidden = true;
    }

    // Confirm stays enabled so the server's lint verdict (e.g. empty
    // label) is surfaced inline rather than silently preempted.
    this.confirmBtn.disabled = false;
    for (const box of this.suggestBox.querySelectorAll("input[data-cui]")) {
      (box as HTMLInputElement).disabled = this.cuiLessInput.checked;
    }
  }

  renderList(): void {
    const docEl = this.root.ownerDocument;
    this.annList.textContent = "";
    const rows = [...this.annotations].sort(
      (a, b) => a.start - b.start || a.end - b.end || a.id.localeCompare(b.id)
    );
    for (const ann of rows) {
      const li = docEl.createElement("li");
      li.dataset["annId"] = ann.id;
      li.className = `ann status-${ann.status}`;

      const badge = docEl.createElement("span");
      badge.className = "badge";
      badge.textContent = ann.status;

      const where = docEl.createElement("span");
      where.className = "where";
      where.textContent = `[${ann.start}, ${ann.end})`;

      const label = docEl.createElement("span");
      label.className = "label";
      label.textContent = ann.cui_less ? "CUI-less" : ann.cuis.join(", ");

      const who = docEl.createElement("small");
      who.textContent = ann.annotator_id;

      li.append(badge, where, label, who);

      const actions = docEl.createElement("span");
      actions.className = "actions";
      const mk = (action: string, text: string, title: string) => {
        const b = docEl.createElement("button");
        b.type = "button";
        b.setAttribute("data-action", action);
        b.setAttribute("data-id", ann.id);
        b.textContent = text;
        b.title = title;
        return b;
      };
      if (ann.status === "proposed") {
        actions.append(
          mk("accept", "✓", "accept"),
          mk("reject", "✗", "reject")
        );
      }
      actions.append(mk("edit", "✎", "edit"), mk("delete", "🗑", "delete"));
      li.appendChild(actions);
      this.annList.appendChild(li);
    }
  }

  private renderError(): void {
    this.errorBox.textContent = "";
    const hasError = this.errorDetail.length > 0;
    this.errorBox.hidden = !hasError;
    if (!hasError) return;
    const docEl = this.root.ownerDocument;
    const head = docEl.createElement("div");
    head.textContent = this.errorDetail;
    this.errorBox.appendChild(head);
    for (const f of this.errorFindings) {
      const line = docEl.createElement("div");
      line.className = "finding";
      line.textContent = `${f.rule}: ${f.message}`;
      this.errorBox.appendChild(line);
    }
  }
}

export const mountApp = (
  root: HTMLElement,
  options: AppOptions = {}
): Workbench => new Workbench(root, options);
