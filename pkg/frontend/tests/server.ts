// Spawns the real screening service for integration tests.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));

export interface Fixture {
  dir: string;
  registrations: string;
  articles: string;
}

export function makeFixture(): Fixture {
  const dir = mkdtempSync(join(tmpdir(), "trialink-ui-"));
  execFileSync("python3", [join(here, "fixture_corpus.py"), dir]);
  return {
    dir,
    registrations: join(dir, "registrations.jsonl"),
    articles: join(dir, "articles.jsonl"),
  };
}

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      const port = address.port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

export interface ServerHandle {
  baseUrl: string;
  port: number;
  logPath: string;
  proc: ChildProcess;
  kill(): Promise<void>;
}

export async function startServer(
  fixture: Fixture,
  logPath: string,
  port?: number,
): Promise<ServerHandle> {
  const chosen = port ?? (await freePort());
  const proc = spawn(
    "python3",
    [
      "-m",
      "trialink",
      "serve",
      "--registrations",
      fixture.registrations,
      "--articles",
      fixture.articles,
      "--log",
      logPath,
      "--host",
      "127.0.0.1",
      "--port",
      String(chosen),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  const baseUrl = `http://127.0.0.1:${chosen}`;

  const deadline = Date.now() + 30_000;
  for (;;) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early (${proc.exitCode}): ${stderr}`);
    }
    try {
      const resp = await fetch(`${baseUrl}/api/progress`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill("SIGKILL");
      throw new Error(`service did not become ready: ${stderr}`);
    }
    await new Promise((r) => setTimeout(r, 150));
  }

  return {
    baseUrl,
    port: chosen,
    logPath,
    proc,
    kill() {
      return new Promise<void>((resolve) => {
        if (proc.exitCode !== null) {
          resolve();
          return;
        }
        proc.once("exit", () => resolve());
        proc.kill("SIGKILL");
      });
    },
  };
}
