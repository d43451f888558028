/**
 * Scripted end-to-end workflow against a live service process:
 * load scene -> paint mask -> frustum project -> auto segment (geometric
 * provider) -> browse job frames -> add one correction -> export. The final
 * selection count and exported bytes must match a headless run of the same
 * steps through the engine, and undo must restore each prior state.
 */

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionWorkflow } from "../src/workflow.js";

const PORT = 18731 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const TEST_DIR = new URL(".", import.meta.url).pathname;

let server: ChildProcess;
let fixtureDir: string;

async function waitForServer(timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/docs`);
      if (response.status < 500) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not start");
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}

beforeAll(async () => {
  fixtureDir = mkdtempSync(join(tmpdir(), "splatselect-ui-"));
  execFileSync("python3", [join(TEST_DIR, "make_fixture.py"), fixtureDir], {
    stdio: ["ignore", "pipe", "inherit"],
  });
  server = spawn(
    "python3",
    ["-m", "splatselect.cli", "serve", "--listen", `127.0.0.1:${PORT}`],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForServer();
}, 60000);

afterAll(() => {
  server?.kill();
});

describe("browser workflow against the live service", () => {
  it("completes the loop and matches the headless twin", async () => {
    const workflow = new SessionWorkflow(new ApiClient(BASE));
    workflow.state.intrinsics = {
      fx: 48, fy: 48, cx: 32, cy: 32, width: 64, height: 64, near: 0.05, far: 50,
    };
    workflow.state.orbit = {
      target: [0, 0, 0], azimuth: 0.35, elevation: 0.1, distance: 3.2, up: [0, 1, 0],
    };

    // -- load scene
    const scenePath = join(fixtureDir, "scene.ply");
    const gaussians = await workflow.open(scenePath);
    expect(gaussians).toBe(400);
    const history: number[] = [];

    // -- paint a mask over the lower cluster
    const stroke: Array<[number, number]> = [[26, 32], [32, 36], [38, 33]];
    workflow.state.brushRadius = 9;
    workflow.state.occlusionFree = true;
    const maskPixels = await workflow.paintStroke(stroke, "N");
    expect(maskPixels).toBeGreaterThan(0);
    history.push(workflow.state.selectionCount); // selection still 0 here

    // -- frustum projection
    const projected = await workflow.project("frustum", "N");
    expect(projected).toBeGreaterThan(0);
    history.push(projected);

    // -- automatic segmentation with the geometric provider (streaming)
    const losses: number[] = [];
    const result = await workflow.runAutoseg(
      { m: 8, presegment: true, provider: "geometric", mode: "N" },
      (_view, loss) => losses.push(loss),
    );
    expect(losses.length).toBeGreaterThan(0);
    expect(result.count).toBeGreaterThan(0);
    history.push(result.count);

    // -- browse every tracked frame
    const info = await workflow.jobInfo();
    expect(info.frames).toBe(8);
    for (let k = 0; k < info.frames; k++) {
      const frame = await workflow.browseFrame(k === 0 ? 0 : 1);
      expect(frame.size).toBeGreaterThan(100); // a real PNG, not an error
    }

    // -- add one correction at frame 3
    const correctionPng = readFileSync(join(fixtureDir, "correction.png"));
    const corrected = await workflow.correctFrame(3, correctionPng.toString("base64"));
    history.push(corrected);

    // -- export the selection
    const exportPath = join(fixtureDir, "ui_export.ply");
    const written = await workflow.exportTo(exportPath);
    expect(written).toBe(corrected);
    expect(existsSync(exportPath)).toBe(true);

    // -- headless twin: the same steps straight through the engine
    const specPath = join(fixtureDir, "twin_spec.json");
    const twinExport = join(fixtureDir, "twin_export.ply");
    writeFileSync(specPath, JSON.stringify({
      scene: scenePath,
      camera: workflow.camera(),
      stroke,
      radius: workflow.state.brushRadius,
      m: 8,
      presegment: true,
      correction_png: join(fixtureDir, "correction.png"),
      correction_position: 3,
      export_path: twinExport,
    }));
    const twinOut = execFileSync(
      "python3", [join(TEST_DIR, "headless_twin.py"), specPath], { encoding: "utf-8" },
    );
    const twin = JSON.parse(twinOut.trim());

    expect(history[1]).toBe(twin.project);
    expect(history[2]).toBe(twin.autoseg);
    expect(history[3]).toBe(twin.correction);
    expect(written).toBe(twin.exported);

    // bit-identical exported scenes
    const uiBytes = readFileSync(exportPath);
    const twinBytes = readFileSync(twinExport);
    expect(uiBytes.equals(twinBytes)).toBe(true);

    // -- undo restores each prior state, newest first
    const afterCorrectionUndo = await workflow.undo();
    expect(afterCorrectionUndo).toBe(history[2]); // back to the autoseg result
    const afterAutosegUndo = await workflow.undo();
    expect(afterAutosegUndo).toBe(history[1]); // back to the projection
    const afterProjectUndo = await workflow.undo();
    expect(afterProjectUndo).toBe(history[0]); // back to the empty selection
    // and redo walks forward again
    expect(await workflow.redo()).toBe(history[1]);
    expect(await workflow.redo()).toBe(history[2]);
  }, 120000);
});
