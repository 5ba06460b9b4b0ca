// Operator API message shapes and response-line parsing.
//
// The fog answers every request with text lines: OK / ERR / REPORT <json> /
// EDGE / STAT / END. Everything the console renders traces back to fields
// parsed here.

export interface Evidence {
  box: [number, number, number, number];
  spans_b64?: string;
  rle_b64?: string;
}

export interface Report {
  query_id: number;
  camera_id: string;
  sequence: number;
  timestamp: number;
  latitude: number;
  longitude: number;
  person_index: number;
  clauses: [string, string, number][];
  evidence: Record<string, Evidence>;
}

export interface EdgeRow {
  camera_id: string;
  latitude: number;
  longitude: number;
  state: string;
}

export type ResponseLine =
  | { kind: "ok"; queryId: number; dispatched: number }
  | { kind: "ok-plain"; detail: string }
  | { kind: "err"; errType: string; token: string; message: string }
  | { kind: "report"; report: Report }
  | { kind: "edge"; edge: EdgeRow }
  | { kind: "stat"; key: string; value: string }
  | { kind: "end"; count: number };

export function parseResponseLine(line: string): ResponseLine {
  const space = line.indexOf(" ");
  const tag = space < 0 ? line : line.slice(0, space);
  const rest = space < 0 ? "" : line.slice(space + 1);
  switch (tag) {
    case "OK": {
      const parts = rest.split(" ");
      const queryId = Number(parts[0]);
      if (Number.isFinite(queryId) && parts.length >= 2) {
        return { kind: "ok", queryId, dispatched: Number(parts[1]) };
      }
      return { kind: "ok-plain", detail: rest };
    }
    case "ERR": {
      const parts = rest.split(" ");
      return {
        kind: "err",
        errType: parts[0] ?? "Error",
        token: parts[1] === "-" ? "" : parts[1] ?? "",
        message: parts.slice(2).join(" "),
      };
    }
    case "REPORT":
      return { kind: "report", report: JSON.parse(rest) as Report };
    case "EDGE": {
      const parts = rest.split(" ");
      return {
        kind: "edge",
        edge: {
          camera_id: parts[0],
          latitude: Number(parts[1]),
          longitude: Number(parts[2]),
          state: parts[3],
        },
      };
    }
    case "STAT": {
      const parts = rest.split(" ");
      return { kind: "stat", key: parts[0], value: parts.slice(1).join(" ") };
    }
    case "END":
      return { kind: "end", count: Number(rest) };
    default:
      throw new Error(`unrecognized response line: ${line}`);
  }
}
