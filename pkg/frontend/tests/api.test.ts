import { describe, expect, it } from "vitest";

import { parseResponseLine } from "../src/api.js";

describe("parseResponseLine", () => {
  it("parses OK with query id and dispatch count", () => {
    expect(parseResponseLine("OK 7 3")).toEqual({ kind: "ok", queryId: 7, dispatched: 3 });
  });

  it("parses plain OK", () => {
    expect(parseResponseLine("OK cancelled")).toEqual({ kind: "ok-plain", detail: "cancelled" });
  });

  it("parses ERR with the offending token", () => {
    const parsed = parseResponseLine("ERR UnknownGarment gizmo unknown garment 'gizmo'");
    expect(parsed).toEqual({
      kind: "err",
      errType: "UnknownGarment",
      token: "gizmo",
      message: "unknown garment 'gizmo'",
    });
  });

  it("treats a dash token as empty", () => {
    const parsed = parseResponseLine("ERR BadRequest - empty request");
    expect(parsed.kind).toBe("err");
    if (parsed.kind === "err") expect(parsed.token).toBe("");
  });

  it("parses REPORT json", () => {
    const payload = {
      query_id: 1, camera_id: "cam0", sequence: 4, timestamp: 400,
      latitude: 42.1, longitude: -75.9, person_index: 0,
      clauses: [["torso", "grey", 1]], evidence: {},
    };
    const parsed = parseResponseLine("REPORT " + JSON.stringify(payload));
    expect(parsed.kind).toBe("report");
    if (parsed.kind === "report") {
      expect(parsed.report.camera_id).toBe("cam0");
      expect(parsed.report.clauses[0]).toEqual(["torso", "grey", 1]);
    }
  });

  it("parses EDGE and END", () => {
    expect(parseResponseLine("EDGE cam0 42.1 -75.9 connected")).toEqual({
      kind: "edge",
      edge: { camera_id: "cam0", latitude: 42.1, longitude: -75.9, state: "connected" },
    });
    expect(parseResponseLine("END 5")).toEqual({ kind: "end", count: 5 });
  });

  it("rejects junk", () => {
    expect(() => parseResponseLine("BANANA 7")).toThrow();
  });
});
