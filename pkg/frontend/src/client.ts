// Operator API client: one POSTed request line per call, responses read as
// streamed lines. fetch is injectable for tests.

import { EdgeRow, Report, ResponseLine, parseResponseLine } from "./api.js";
import { readLines } from "./lines.js";

export type FetchFn = typeof fetch;

export class OperatorError extends Error {
  constructor(
    public errType: string,
    public token: string,
    message: string,
  ) {
    super(message);
  }
}

export class OperatorClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchFn = fetch,
  ) {}

  private async *request(line: string, signal?: AbortSignal): AsyncGenerator<ResponseLine> {
    const resp = await this.fetchFn(`${this.baseUrl}/api`, {
      method: "POST",
      body: line,
      signal,
    });
    if (!resp.ok || !resp.body) {
      throw new Error(`operator endpoint answered HTTP ${resp.status}`);
    }
    for await (const raw of readLines(resp.body)) {
      if (raw.trim().length === 0) continue;
      yield parseResponseLine(raw);
    }
  }

  private async single(line: string): Promise<ResponseLine> {
    for await (const parsed of this.request(line)) {
      if (parsed.kind === "err") {
        throw new OperatorError(parsed.errType, parsed.token, parsed.message);
      }
      return parsed;
    }
    throw new Error("empty operator response");
  }

  async submit(text: string, scope: string[] | null = null): Promise<{ queryId: number; dispatched: number }> {
    const scopeToken = scope && scope.length ? scope.join(",") : "*";
    const parsed = await this.single(`SUBMIT ${scopeToken} ${text}`);
    if (parsed.kind !== "ok") throw new Error(`unexpected reply ${parsed.kind}`);
    return { queryId: parsed.queryId, dispatched: parsed.dispatched };
  }

  async cancel(queryId: number): Promise<void> {
    await this.single(`CANCEL ${queryId}`);
  }

  async offline(startMs: number, endMs: number, text: string): Promise<Report[]> {
    const out: Report[] = [];
    for await (const parsed of this.request(`OFFLINE ${startMs} ${endMs} ${text}`)) {
      if (parsed.kind === "err") {
        throw new OperatorError(parsed.errType, parsed.token, parsed.message);
      }
      if (parsed.kind === "report") out.push(parsed.report);
      if (parsed.kind === "end") break;
    }
    return out;
  }

  async edges(): Promise<EdgeRow[]> {
    const out: EdgeRow[] = [];
    for await (const parsed of this.request("EDGES")) {
      if (parsed.kind === "edge") out.push(parsed.edge);
      if (parsed.kind === "end") break;
    }
    return out;
  }

  // Live feed: resolves with the total delivered count once the session
  // closes (cancel or expiry); each report invokes onReport as it lands.
  async stream(
    queryId: number,
    onReport: (report: Report) => void,
    signal?: AbortSignal,
  ): Promise<number> {
    let count = 0;
    for await (const parsed of this.request(`STREAM ${queryId}`, signal)) {
      if (parsed.kind === "err") {
        throw new OperatorError(parsed.errType, parsed.token, parsed.message);
      }
      if (parsed.kind === "report") {
        count += 1;
        onReport(parsed.report);
      }
      if (parsed.kind === "end") break;
    }
    return count;
  }
}
