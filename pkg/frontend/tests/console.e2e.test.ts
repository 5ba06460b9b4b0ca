// End to end against a real fog: spawns the Python topology fixture and
// drives the console client over the live operator API.

import { ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Report } from "../src/api.js";
import { OperatorClient, OperatorError } from "../src/client.js";
import { ConsoleState, reportCells } from "../src/state.js";

const here = dirname(fileURLToPath(import.meta.url));

let child: ChildProcess;
let client: OperatorClient;

beforeAll(async () => {
  child = spawn("python3", [join(here, "fog_stack.py")], {
    stdio: ["pipe", "pipe", "inherit"],
  });
  const port = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("fog fixture never came up")), 20000);
    child.stdout!.once("data", (data: Buffer) => {
      clearTimeout(timer);
      resolve(Number(data.toString().trim()));
    });
    child.once("exit", (code) => reject(new Error(`fog fixture exited ${code}`)));
  });
  client = new OperatorClient(`http://127.0.0.1:${port}`);
}, 30000);

afterAll(() => {
  child.stdin?.end();
  child.kill();
});

describe("console against a seeded topology", () => {
  it("parse errors surface inline with the offending token", async () => {
    const state = new ConsoleState();
    const err = await client.submit("purple gizmo").catch((e) => e);
    expect(err).toBeInstanceOf(OperatorError);
    const oe = err as OperatorError;
    state.submitFailed("purple gizmo", oe.errType, oe.token, oe.message);
    expect(state.sessions[0].state).toBe("error");
    expect(state.sessions[0].error!.token).toBe("gizmo");
  });

  it("red hat, blue jeans renders match rows and cancel stops the stream", async () => {
    const state = new ConsoleState();
    const { queryId, dispatched } = await client.submit("red hat, blue jeans");
    expect(dispatched).toBe(1);
    state.sessionSubmitted(queryId, "red hat, blue jeans", dispatched);

    let cancelled = false;
    const reports: Report[] = [];
    const streamed = client.stream(queryId, (report) => {
      reports.push(report);
      state.reportArrived(queryId, report);
      if (reports.length >= 2 && !cancelled) {
        cancelled = true;
        void client.cancel(queryId);
      }
    });

    const total = await streamed; // resolves only because cancel closed it
    state.sessionClosed(queryId, "cancelled");
    expect(total).toBeGreaterThanOrEqual(2);

    const row = state.find(queryId)!;
    expect(row.state).toBe("cancelled");
    const cells = reportCells(row.reports[0]);
    expect(cells.camera).toBe("cam0");
    expect(cells.location).toBe("42.1000, -75.9000");
    expect(cells.clauses).toContain("red hair");
    expect(cells.clauses).toContain("blue left_leg");
    expect(cells.evidenceSections).toContain("hair");
    // evidence blobs decode into drawable thumbnails
    const { decodeRegion } = await import("../src/rle.js");
    const image = decodeRegion(row.reports[0].evidence["hair"]);
    expect(image).not.toBeNull();
    expect(image!.width).toBeGreaterThan(0);
  }, 30000);

  it("offline search returns the indexed matches as static rows", async () => {
    const reports = await client.offline(0, 10_000_000, "grey t-shirt");
    expect(reports.length).toBeGreaterThan(0);
    expect(reports[0].camera_id).toBe("cam0");
  });
});
