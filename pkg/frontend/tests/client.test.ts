import { describe, expect, it } from "vitest";

import { Report } from "../src/api.js";
import { OperatorClient, OperatorError } from "../src/client.js";

function textResponse(lines: string[], status = 200): Response {
  const encoder = new TextEncoder();
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const line of lines) controller.enqueue(encoder.encode(line + "\n"));
      controller.close();
    },
  });
  return new Response(body, { status });
}

function fakeFetch(routes: (request: string) => string[]): typeof fetch {
  return async (input: RequestInfo | URL, init?: RequestInit) => {
    expect(String(input)).toContain("/api");
    const request = String(init?.body ?? "");
    return textResponse(routes(request));
  };
}

const REPORT: Report = {
  query_id: 3, camera_id: "cam0", sequence: 9, timestamp: 900,
  latitude: 42.1, longitude: -75.9, person_index: 0,
  clauses: [["torso", "grey", 1]],
  evidence: { torso: { box: [1, 2, 3, 4] } },
};

describe("OperatorClient", () => {
  it("submits and returns the query id", async () => {
    const client = new OperatorClient("http://fog", fakeFetch((req) => {
      expect(req).toBe("SUBMIT * grey t-shirt");
      return ["OK 3 2"];
    }));
    expect(await client.submit("grey t-shirt")).toEqual({ queryId: 3, dispatched: 2 });
  });

  it("joins an explicit scope with commas", async () => {
    const client = new OperatorClient("http://fog", fakeFetch((req) => {
      expect(req).toBe("SUBMIT cam1,cam2 red hat");
      return ["OK 4 1"];
    }));
    await client.submit("red hat", ["cam1", "cam2"]);
  });

  it("surfaces parse errors with the offending token", async () => {
    const client = new OperatorClient("http://fog", fakeFetch(() =>
      ["ERR UnknownGarment gizmo unknown garment 'gizmo'"]));
    const err = await client.submit("purple gizmo").catch((e) => e);
    expect(err).toBeInstanceOf(OperatorError);
    expect((err as OperatorError).token).toBe("gizmo");
  });

  it("streams reports until END and resolves with the count", async () => {
    const client = new OperatorClient("http://fog", fakeFetch((req) => {
      expect(req).toBe("STREAM 3");
      return [
        "REPORT " + JSON.stringify(REPORT),
        "REPORT " + JSON.stringify({ ...REPORT, sequence: 11 }),
        "END 2",
      ];
    }));
    const seen: number[] = [];
    const total = await client.stream(3, (r) => seen.push(r.sequence));
    expect(total).toBe(2);
    expect(seen).toEqual([9, 11]);
  });

  it("collects offline results", async () => {
    const client = new OperatorClient("http://fog", fakeFetch((req) => {
      expect(req).toBe("OFFLINE 0 5000 grey t-shirt");
      return ["REPORT " + JSON.stringify(REPORT), "END 1"];
    }));
    const reports = await client.offline(0, 5000, "grey t-shirt");
    expect(reports).toHaveLength(1);
    expect(reports[0].camera_id).toBe("cam0");
  });

  it("lists edges", async () => {
    const client = new OperatorClient("http://fog", fakeFetch(() =>
      ["EDGE cam0 42.1 -75.9 connected", "END 1"]));
    const edges = await client.edges();
    expect(edges).toEqual([
      { camera_id: "cam0", latitude: 42.1, longitude: -75.9, state: "connected" },
    ]);
  });

  it("cancel tolerates the plain OK reply", async () => {
    const client = new OperatorClient("http://fog", fakeFetch((req) => {
      expect(req).toBe("CANCEL 3");
      return ["OK cancelled"];
    }));
    await client.cancel(3);
  });

  it("raises on transport failure", async () => {
    const failing: typeof fetch = async () => textResponse([], 502);
    const client = new OperatorClient("http://fog", failing);
    await expect(client.submit("grey t-shirt")).rejects.toThrow("502");
  });
});
