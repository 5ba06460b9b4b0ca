// Console session state, kept apart from the DOM so it can be tested.
// Everything here is derived from operator-API messages and nothing else.

import { Report } from "./api.js";

export type SessionState = "active" | "cancelled" | "ended" | "error";

export interface SessionRow {
  queryId: number;
  text: string;
  state: SessionState;
  dispatched: number;
  reports: Report[];
  error?: { errType: string; token: string; message: string };
}

export class ConsoleState {
  sessions: SessionRow[] = [];

  sessionSubmitted(queryId: number, text: string, dispatched: number): SessionRow {
    const row: SessionRow = { queryId, text, state: "active", dispatched, reports: [] };
    this.sessions.unshift(row);
    return row;
  }

  submitFailed(text: string, errType: string, token: string, message: string): SessionRow {
    const row: SessionRow = {
      queryId: -1,
      text,
      state: "error",
      dispatched: 0,
      reports: [],
      error: { errType, token, message },
    };
    this.sessions.unshift(row);
    return row;
  }

  find(queryId: number): SessionRow | undefined {
    return this.sessions.find((s) => s.queryId === queryId);
  }

  reportArrived(queryId: number, report: Report): void {
    const row = this.find(queryId);
    if (row && row.state === "active") {
      row.reports.push(report);
    }
  }

  sessionClosed(queryId: number, state: SessionState): void {
    const row = this.find(queryId);
    if (row && row.state === "active") {
      row.state = state;
    }
  }
}

// The table model: every cell value is a direct trace of a report field
// (no synthesized values beyond formatting).
export interface ReportCells {
  camera: string;
  frame: string;
  time: string;
  location: string;
  clauses: string;
  evidenceSections: string[];
}

export function reportCells(report: Report): ReportCells {
  return {
    camera: report.camera_id,
    frame: String(report.sequence),
    time: new Date(report.timestamp).toISOString(),
    location: `${report.latitude.toFixed(4)}, ${report.longitude.toFixed(4)}`,
    clauses: report.clauses.map(([s, c, k]) => `${c} ${s}${k > 1 ? ` (k=${k})` : ""}`).join(", "),
    evidenceSections: Object.keys(report.evidence),
  };
}
