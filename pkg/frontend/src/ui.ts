/** DOM layer: single-page layout with prompt box, live preview, timeline,
 * and a metrics drawer. No framework, no routing; one in-flight mutation at
 * a time, typed text survives failures. */

import { ApiClient, ApiError, type MetricsReport } from "./api.js";
import {
  applyFinalizeResponse,
  applyPromptResponse,
  canFinalize,
  canSubmitPrompt,
  dismissError,
  initialViewModel,
  type SessionViewModel,
  withError,
  withPending,
  withSession,
} from "./state.js";

const POLL_INTERVAL_MS = 1000;

export class App {
  vm: SessionViewModel = initialViewModel();
  private root: HTMLElement;
  private poller: ReturnType<typeof setInterval> | null = null;

  constructor(
    private client: ApiClient,
    root: HTMLElement,
  ) {
    this.root = root;
    this.renderSkeleton();
  }

  async start(): Promise<void> {
    const created = await this.client.createSession();
    this.vm = withSession(this.vm, created.session_id);
    this.render();
  }

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <header><h1>diffusionx</h1><span id="phase-badge"></span></header>
      <div id="error-banner" hidden>
        <span id="error-text"></span>
        <button id="error-dismiss" type="button">dismiss</button>
      </div>
      <main>
        <section id="compose">
          <textarea id="prompt-input" rows="3" placeholder="describe the image…"></textarea>
          <div>
            <button id="submit-btn" type="button">generate preview</button>
            <button id="finalize-btn" type="button">finalize → cloud refine</button>
          </div>
        </section>
        <section id="preview">
          <img id="preview-image" alt="" hidden />
        </section>
        <section id="timeline"><h2>rounds</h2><ol id="timeline-list"></ol></section>
        <section id="metrics">
          <h2>metrics</h2>
          <button id="metrics-refresh" type="button">refresh</button>
          <div id="metrics-table"><p id="metrics-empty">no completed sessions yet</p></div>
        </section>
      </main>`;
    this.el("submit-btn").addEventListener("click", () => void this.submitPrompt());
    this.el("finalize-btn").addEventListener("click", () => void this.finalize());
    this.el("error-dismiss").addEventListener("click", () => {
      this.vm = dismissError(this.vm);
      this.render();
    });
    this.el("metrics-refresh").addEventListener("click", () => void this.refreshMetrics());
  }

  el(id: string): HTMLElement {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as HTMLElement;
  }

  promptText(): string {
    return (this.el("prompt-input") as HTMLTextAreaElement).value;
  }

  async submitPrompt(): Promise<void> {
    if (!canSubmitPrompt(this.vm)) return;
    const prompt = this.promptText().trim();
    if (!prompt) return;
    this.vm = withPending(this.vm, true);
    this.render();
    try {
      const response = await this.client.submitPrompt(this.vm.sessionId!, prompt);
      this.vm = applyPromptResponse(this.vm, prompt, response);
      (this.el("prompt-input") as HTMLTextAreaElement).value = "";
    } catch (err) {
      // typed text is left untouched so nothing is lost
      this.vm = withError(this.vm, err instanceof ApiError ? err.message : String(err));
    }
    this.render();
  }

  async finalize(): Promise<void> {
    if (!canFinalize(this.vm)) return;
    this.vm = withPending(this.vm, true);
    this.render();
    this.startPolling();
    try {
      const response = await this.client.finalize(this.vm.sessionId!);
      this.vm = applyFinalizeResponse(this.vm, response);
    } catch (err) {
      this.vm = withError(this.vm, err instanceof ApiError ? err.message : String(err));
      await this.refetchPhase();
    }
    this.stopPolling();
    this.render();
  }

  /** Poll session phase while the cloud refinement is in flight. */
  private startPolling(): void {
    this.poller = setInterval(() => void this.refetchPhase(), POLL_INTERVAL_MS);
  }

  private stopPolling(): void {
    if (this.poller !== null) {
      clearInterval(this.poller);
      this.poller = null;
    }
  }

  private async refetchPhase(): Promise<void> {
    if (!this.vm.sessionId) return;
    try {
      const snapshot = await this.client.getSession(this.vm.sessionId);
      this.vm = { ...this.vm, phase: snapshot.phase as SessionViewModel["phase"] };
      this.render();
    } catch {
      // transient; next poll or user action will retry
    }
  }

  async refreshMetrics(): Promise<void> {
    const report = await this.client.getMetrics();
    this.renderMetrics(report);
  }

  renderMetrics(report: MetricsReport): void {
    const container = this.el("metrics-table");
    if (report.rows.length === 0) {
      container.innerHTML = `<p id="metrics-empty">no completed sessions yet</p>`;
      return;
    }
    const rows = report.rows
      .map(
        (r) =>
          `<tr><td>${r.scenario}</td><td>${r.trans_latency_s.toFixed(2)}</td>` +
          `<td>${r.total_latency_s.toFixed(2)}</td>` +
          `<td>${r.delta_pct === null ? "-" : r.delta_pct.toFixed(1)}</td></tr>`,
      )
      .join("");
    container.innerHTML =
      `<table><thead><tr><th>scenario</th><th>trans (s)</th><th>total (s)</th>` +
      `<th>delta %</th></tr></thead><tbody>${rows}</tbody></table>`;
  }

  render(): void {
    const vm = this.vm;
    this.el("phase-badge").textContent = vm.phase + (vm.pending ? " (working…)" : "");

    const banner = this.el("error-banner");
    banner.hidden = vm.error === null;
    this.el("error-text").textContent = vm.error ?? "";

    (this.el("submit-btn") as HTMLButtonElement).disabled = !canSubmitPrompt(vm);
    (this.el("finalize-btn") as HTMLButtonElement).disabled = !canFinalize(vm);
    (this.el("prompt-input") as HTMLTextAreaElement).disabled =
      vm.phase === "refined" || vm.phase === "closed" || vm.phase === "cloud_refining";

    const preview = this.el("preview-image") as HTMLImageElement;
    const latest = vm.rounds[vm.rounds.length - 1];
    if (latest) {
      preview.src = this.client.imageUrl(latest.imageUrl);
      preview.hidden = false;
    }

    const list = this.el("timeline-list");
    list.innerHTML = "";
    for (const entry of vm.rounds) {
      const item = document.createElement("li");
      item.dataset.tier = entry.tier;
      const strengthBadge =
        entry.strength === null
          ? ""
          : `<span class="strength-badge">s=${entry.strength.toFixed(2)}</span>`;
      const transmit =
        entry.latency.transmit_s > 0
          ? `<span class="transmit">↑ ${entry.latency.transmit_s.toFixed(2)}s</span>`
          : "";
      item.innerHTML =
        `<span class="round">#${entry.roundIndex}</span> ` +
        `<span class="tier">[${entry.tier}]</span> ${escapeHtml(entry.prompt)} ${strengthBadge} ` +
        `<span class="latency" title="predict ${entry.latency.predict_s.toFixed(3)}s · ` +
        `generate ${entry.latency.generate_s.toFixed(3)}s · ` +
        `transmit ${entry.latency.transmit_s.toFixed(3)}s">` +
        `${entry.latency.total_s.toFixed(2)}s</span> ${transmit}`;
      list.appendChild(item);
    }
  }
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
