// DOM rendering. Thin by design: all decisions live in state.ts/client.ts.

import { Report } from "./api.js";
import { OperatorClient, OperatorError } from "./client.js";
import { decodeRegion } from "./rle.js";
import { ConsoleState, SessionRow, reportCells } from "./state.js";

export class ConsoleUI {
  private state = new ConsoleState();
  private controllers = new Map<number, AbortController>();

  constructor(
    private client: OperatorClient,
    private root: HTMLElement,
  ) {
    this.root.innerHTML = `
      <h1>ivise operator console</h1>
      <form id="query-form">
        <input id="query-text" placeholder="red hat, blue jeans" size="40" />
        <input id="query-scope" placeholder="scope (blank = all cameras)" size="24" />
        <button type="submit">Submit</button>
        <span id="form-error" class="error"></span>
      </form>
      <div id="sessions"></div>
    `;
    const form = this.root.querySelector<HTMLFormElement>("#query-form")!;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
  }

  private input(id: string): HTMLInputElement {
    return this.root.querySelector<HTMLInputElement>(`#${id}`)!;
  }

  async submit(): Promise<void> {
    const text = this.input("query-text").value.trim();
    const scopeRaw = this.input("query-scope").value.trim();
    const scope = scopeRaw ? scopeRaw.split(",").map((s) => s.trim()) : null;
    const errorSpan = this.root.querySelector("#form-error")!;
    errorSpan.textContent = "";
    try {
      const { queryId, dispatched } = await this.client.submit(text, scope);
      const row = this.state.sessionSubmitted(queryId, text, dispatched);
      this.renderSessions();
      this.startStream(row);
    } catch (err) {
      if (err instanceof OperatorError) {
        // parse errors render inline and name the offending token
        errorSpan.textContent = `${err.errType}: ${err.token} — ${err.message}`;
      } else {
        errorSpan.textContent = `fog unreachable — retry: ${String(err)}`;
      }
    }
  }

  private startStream(row: SessionRow): void {
    const controller = new AbortController();
    this.controllers.set(row.queryId, controller);
    this.client
      .stream(
        row.queryId,
        (report) => {
          this.state.reportArrived(row.queryId, report);
          this.renderSessions();
        },
        controller.signal,
      )
      .then(() => this.state.sessionClosed(row.queryId, "ended"))
      .catch(() => this.state.sessionClosed(row.queryId, "error"))
      .finally(() => this.renderSessions());
  }

  async cancel(queryId: number): Promise<void> {
    await this.client.cancel(queryId);
    this.state.sessionClosed(queryId, "cancelled");
    this.controllers.get(queryId)?.abort();
    this.renderSessions();
  }

  private renderSessions(): void {
    const host = this.root.querySelector("#sessions")!;
    host.innerHTML = "";
    for (const row of this.state.sessions) {
      host.appendChild(this.sessionElement(row));
    }
  }

  private sessionElement(row: SessionRow): HTMLElement {
    const div = document.createElement("div");
    div.className = `session ${row.state}`;
    const title = document.createElement("h3");
    title.textContent =
      row.queryId >= 0
        ? `#${row.queryId} "${row.text}" — ${row.state} (${row.dispatched} edges)`
        : `"${row.text}" — ${row.error?.errType}: ${row.error?.token}`;
    div.appendChild(title);
    if (row.state === "active") {
      const btn = document.createElement("button");
      btn.textContent = "Cancel";
      btn.addEventListener("click", () => void this.cancel(row.queryId));
      div.appendChild(btn);
    }
    const table = document.createElement("table");
    table.innerHTML =
      "<tr><th>camera</th><th>frame</th><th>time</th><th>location</th>" +
      "<th>matched</th><th>evidence</th></tr>";
    row.reports.forEach((report, i) => {
      table.appendChild(this.reportRow(report, i === row.reports.length - 1));
    });
    div.appendChild(table);
    return div;
  }

  private reportRow(report: Report, newest: boolean): HTMLElement {
    const cells = reportCells(report);
    const tr = document.createElement("tr");
    if (newest) tr.className = "newest";
    for (const value of [cells.camera, cells.frame, cells.time, cells.location, cells.clauses]) {
      const td = document.createElement("td");
      td.textContent = value;
      tr.appendChild(td);
    }
    const td = document.createElement("td");
    for (const section of cells.evidenceSections) {
      const canvas = this.thumbnail(report, section);
      if (canvas) td.appendChild(canvas);
    }
    tr.appendChild(td);
    return tr;
  }

  private thumbnail(report: Report, section: string): HTMLCanvasElement | null {
    const evidence = report.evidence[section];
    const image = decodeRegion(evidence);
    const canvas = document.createElement("canvas");
    canvas.title = `${section} ${evidence.box.join(",")}`;
    canvas.width = image ? image.width : 48;
    canvas.height = image ? image.height : 48;
    const ctx = canvas.getContext("2d");
    if (!ctx) return null;
    if (image) {
      ctx.putImageData(new ImageData(image.data, image.width, image.height), 0, 0);
    }
    // evidence bounding box drawn over the region thumbnail
    ctx.strokeStyle = "#ff3355";
    ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
    return canvas;
  }

  async showOffline(startMs: number, endMs: number, text: string): Promise<void> {
    const reports = await this.client.offline(startMs, endMs, text);
    const row = this.state.sessionSubmitted(-2, `${text} (offline)`, 0);
    row.state = "ended";
    for (const report of reports) row.reports.push(report);
    this.renderSessions();
  }
}
