/** Length-prefixed little-endian frame protocol shared with the engine server. */

export const OP = {
    CREATE: 1,
    STEP: 2,
    LOSSES: 3,
    CLOSE: 4,
} as const;

export const STATUS = {
    OK: 0,
    PARSE_ERROR: 1,
    BAD_HANDLE: 2,
    BUSY: 3,
    INTERNAL: 4,
    TRANSPORT: 5, // client-side: bridge process unavailable
} as const;

export type StatusCode = (typeof STATUS)[keyof typeof STATUS];

export function encodeFrame(opcode: number, handle: number, body: Buffer): Buffer {
    const payload = Buffer.allocUnsafe(4 + 1 + 4 + body.length);
    payload.writeUInt32LE(1 + 4 + body.length, 0);
    payload.writeUInt8(opcode, 4);
    payload.writeUInt32LE(handle >>> 0, 5);
    body.copy(payload, 9);
    return payload;
}

export function encodeCreate(configText: string): Buffer {
    return encodeFrame(OP.CREATE, 0, Buffer.from(configText, "utf-8"));
}

export function encodeStep(handle: number, poses: Float64Array | null): Buffer {
    if (poses === null) {
        return encodeFrame(OP.STEP, handle, Buffer.from([0]));
    }
    if (poses.length % 4 !== 0) {
        throw new Error("poses must be a flat (n, 4) array of (x, y, yaw, z)");
    }
    const n = poses.length / 4;
    const body = Buffer.allocUnsafe(1 + 4 + 8 * poses.length);
    body.writeUInt8(1, 0);
    body.writeUInt32LE(n, 1);
    Buffer.from(poses.buffer, poses.byteOffset, poses.byteLength).copy(body, 5);
    return encodeFrame(OP.STEP, handle, body);
}

export function encodeLosses(
    handle: number,
    n: number,
    a: number,
    d: number,
    muDeploy: Float32Array,
    muPriv: Float32Array,
    zClean: Float32Array,
    zAug: Float32Array,
): Buffer {
    if (muDeploy.length !== n * a || muPriv.length !== n * a) {
        throw new Error("policy mean arrays must have n*a elements");
    }
    if (zClean.length !== n * d || zAug.length !== n * d) {
        throw new Error("latent arrays must have n*d elements");
    }
    const body = Buffer.allocUnsafe(12 + 4 * (2 * n * a + 2 * n * d));
    body.writeUInt32LE(n, 0);
    body.writeUInt32LE(a, 4);
    body.writeUInt32LE(d, 8);
    let off = 12;
    for (const arr of [muDeploy, muPriv, zClean, zAug]) {
        Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength).copy(body, off);
        off += arr.byteLength;
    }
    return encodeFrame(OP.LOSSES, handle, body);
}

export function encodeClose(handle: number): Buffer {
    return encodeFrame(OP.CLOSE, handle, Buffer.alloc(0));
}

export interface Response {
    status: number;
    body: Buffer;
}

/** Incremental parser for length-prefixed response frames. */
export class FrameDecoder {
    private pending: Buffer = Buffer.alloc(0);

    push(chunk: Buffer): Response[] {
        this.pending = this.pending.length === 0 ? chunk : Buffer.concat([this.pending, chunk]);
        const out: Response[] = [];
        for (;;) {
            if (this.pending.length < 4) break;
            const length = this.pending.readUInt32LE(0);
            if (this.pending.length < 4 + length) break;
            const payload = this.pending.subarray(4, 4 + length);
            out.push({ status: payload.readUInt8(0), body: payload.subarray(1) });
            this.pending = this.pending.subarray(4 + length);
        }
        return out;
    }
}

/**
 * View a Buffer region as Float32Array without copying when alignment allows
 * (node pools small Buffers at arbitrary offsets, so a copy is sometimes
 * unavoidable).
 */
export function asFloat32(buf: Buffer, byteOffset: number, count: number): Float32Array {
    const absolute = buf.byteOffset + byteOffset;
    if (absolute % 4 === 0) {
        return new Float32Array(buf.buffer, absolute, count);
    }
    const copy = Buffer.allocUnsafe(count * 4);
    buf.copy(copy, 0, byteOffset, byteOffset + count * 4);
    return new Float32Array(copy.buffer, copy.byteOffset, count);
}
