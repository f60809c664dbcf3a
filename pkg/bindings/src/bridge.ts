/** Engine process management and request/response transport. */

import { spawn, ChildProcessWithoutNullStreams } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

import { FrameDecoder, Response } from "./protocol";

export interface BridgeOptions {
    /** python executable; defaults to $SDF_PYTHON or "python3" */
    python?: string;
    /** extra PYTHONPATH entry for locating the engine package */
    enginePath?: string;
}

const SERVER_RELATIVE = path.join("py", "sdf_bridge_server.py");

function defaultEnginePath(): string | undefined {
    // repo layout: bindings/ sits next to the engine's src/
    const candidate = path.resolve(__dirname, "..", "..", "..", "src");
    return fs.existsSync(path.join(candidate, "sdfsim")) ? candidate : undefined;
}

function serverScript(): string {
    // works from both source (src/) and compiled (dist/src/) layouts
    for (const up of ["..", path.join("..", "..")]) {
        const candidate = path.resolve(__dirname, up, SERVER_RELATIVE);
        if (fs.existsSync(candidate)) return candidate;
    }
    throw new Error("cannot locate sdf_bridge_server.py");
}

/**
 * One engine process. Requests are answered strictly in order, so a FIFO of
 * pending resolvers is all the correlation needed.
 */
export class Bridge {
    private child: ChildProcessWithoutNullStreams;
    private decoder = new FrameDecoder();
    private waiters: Array<(r: Response) => void> = [];
    private dead: string | null = null;

    constructor(options: BridgeOptions = {}) {
        const python = options.python ?? process.env.SDF_PYTHON ?? "python3";
        const enginePath = options.enginePath ?? process.env.SDF_PYTHONPATH ?? defaultEnginePath();
        const env = { ...process.env };
        if (enginePath) {
            env.PYTHONPATH = enginePath + (env.PYTHONPATH ? path.delimiter + env.PYTHONPATH : "");
        }
        this.child = spawn(python, [serverScript()], { env, stdio: ["pipe", "pipe", "pipe"] });
        this.child.stdout.on("data", (chunk: Buffer) => {
            for (const response of this.decoder.push(chunk)) {
                const waiter = this.waiters.shift();
                if (waiter) waiter(response);
            }
        });
        this.child.on("exit", (code) => {
            this.dead = `engine process exited with code ${code}`;
            this.failAll();
        });
        this.child.on("error", (err) => {
            this.dead = `engine process failed to start: ${err.message}`;
            this.failAll();
        });
    }

    private failAll(): void {
        const message = Buffer.from(this.dead ?? "engine unavailable", "utf-8");
        while (this.waiters.length) {
            this.waiters.shift()!({ status: 5, body: message });
        }
    }

    request(frame: Buffer): Promise<Response> {
        if (this.dead) {
            return Promise.resolve({ status: 5, body: Buffer.from(this.dead, "utf-8") });
        }
        return new Promise((resolve) => {
            this.waiters.push(resolve);
            this.child.stdin.write(frame);
        });
    }

    shutdown(): void {
        this.dead = this.dead ?? "bridge shut down";
        this.child.stdin.end();
        this.child.kill();
        this.failAll();
    }
}
