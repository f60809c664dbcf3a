/**
 * Session bindings for the sdfsim depth-simulation engine.
 *
 * The exported sdf_* functions mirror a C-style session API: integer
 * handles, integer status codes, and a last-error string retrieval call.
 * Tensors cross the boundary as contiguous little-endian float32 buffers
 * with an explicit (n, 1, height, width) layout; Float32Array results are
 * zero-copy views onto the received frame where alignment permits and are
 * valid until the next call on the same handle.
 */

import { Bridge, BridgeOptions } from "./bridge";
import {
    STATUS,
    asFloat32,
    encodeClose,
    encodeCreate,
    encodeLosses,
    encodeStep,
} from "./protocol";

export { Bridge, BridgeOptions } from "./bridge";
export { STATUS } from "./protocol";

export interface StepResult {
    status: number;
    /** environments, channels (1), image height, image width */
    shape: [number, number, number, number] | null;
    student: Float32Array | null;
    clean: Float32Array | null;
}

export interface LossResult {
    status: number;
    behavior: number;
    denoise: number;
    kl: number;
    total: number;
}

let defaultBridge: Bridge | null = null;
let lastError = "";

function bridge(): Bridge {
    if (defaultBridge === null) {
        defaultBridge = new Bridge();
    }
    return defaultBridge;
}

/** Configure or replace the engine process used by the sdf_* functions. */
export function sdf_configure(options: BridgeOptions): void {
    sdf_shutdown();
    defaultBridge = new Bridge(options);
}

/** Last error message recorded by any sdf_* call (UTF-8). */
export function sdf_last_error(): string {
    return lastError;
}

/** Stop the engine process; outstanding handles become invalid. */
export function sdf_shutdown(): void {
    defaultBridge?.shutdown();
    defaultBridge = null;
}

const inFlight = new Set<number>();

/**
 * Create a session from config text (the engine's key = value format).
 * Resolves to a positive handle, or the negated status code on failure.
 */
export async function sdf_create(configText: string): Promise<number> {
    const response = await bridge().request(encodeCreate(configText));
    if (response.status !== STATUS.OK) {
        lastError = response.body.toString("utf-8");
        return -response.status;
    }
    return response.body.readUInt32LE(0);
}

/**
 * Advance every environment one frame. poses is a flat (n, 4) array of
 * (x, y, yaw, z) base poses, or null for the engine's built-in trajectory.
 * A session is single-caller: overlapping steps on one handle are rejected
 * with STATUS.BUSY.
 */
export async function sdf_step(
    handle: number,
    poses: Float64Array | null = null,
): Promise<StepResult> {
    if (inFlight.has(handle)) {
        lastError = "concurrent step on one handle rejected";
        return { status: STATUS.BUSY, shape: null, student: null, clean: null };
    }
    inFlight.add(handle);
    try {
        const response = await bridge().request(encodeStep(handle, poses));
        if (response.status !== STATUS.OK) {
            lastError = response.body.toString("utf-8");
            return { status: response.status, shape: null, student: null, clean: null };
        }
        const n = response.body.readUInt32LE(0);
        const h = response.body.readUInt32LE(4);
        const w = response.body.readUInt32LE(8);
        const count = n * h * w;
        return {
            status: STATUS.OK,
            shape: [n, 1, h, w],
            student: asFloat32(response.body, 12, count),
            clean: asFloat32(response.body, 12 + 4 * count, count),
        };
    } finally {
        inFlight.delete(handle);
    }
}

/**
 * Distillation losses over policy means (n, a) and latent batches (n, d);
 * results equal the engine's in-process kernels at float32 precision.
 */
export async function sdf_losses(
    handle: number,
    n: number,
    a: number,
    d: number,
    muDeploy: Float32Array,
    muPriv: Float32Array,
    zClean: Float32Array,
    zAug: Float32Array,
): Promise<LossResult> {
    const frame = encodeLosses(handle, n, a, d, muDeploy, muPriv, zClean, zAug);
    const response = await bridge().request(frame);
    if (response.status !== STATUS.OK) {
        lastError = response.body.toString("utf-8");
        return { status: response.status, behavior: NaN, denoise: NaN, kl: NaN, total: NaN };
    }
    const values = asFloat32(response.body, 0, 4);
    return {
        status: STATUS.OK,
        behavior: values[0],
        denoise: values[1],
        kl: values[2],
        total: values[3],
    };
}

/** Release a session. Returns a status code. */
export async function sdf_close(handle: number): Promise<number> {
    const response = await bridge().request(encodeClose(handle));
    if (response.status !== STATUS.OK) {
        lastError = response.body.toString("utf-8");
    }
    return response.status;
}

/** Convenience wrapper owning one handle. */
export class SdfSession {
    private constructor(readonly handle: number) {}

    static async create(configText: string): Promise<SdfSession> {
        const handle = await sdf_create(configText);
        if (handle <= 0) {
            throw new Error(`session creation failed (${-handle}): ${sdf_last_error()}`);
        }
        return new SdfSession(handle);
    }

    step(poses: Float64Array | null = null): Promise<StepResult> {
        return sdf_step(this.handle, poses);
    }

    losses(
        n: number,
        a: number,
        d: number,
        muDeploy: Float32Array,
        muPriv: Float32Array,
        zClean: Float32Array,
        zAug: Float32Array,
    ): Promise<LossResult> {
        return sdf_losses(this.handle, n, a, d, muDeploy, muPriv, zClean, zAug);
    }

    close(): Promise<number> {
        return sdf_close(this.handle);
    }
}
