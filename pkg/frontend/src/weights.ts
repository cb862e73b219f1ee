import * as fs from "node:fs";

/**
 * Network weight container, mirroring the CLI's portable binary format:
 * little-endian, magic "STRAPW1\0", u32 encoder and decoder layer counts,
 * then tagged layers (1 = conv with u32 dims cout,cin,kh,kw plus float32
 * kernel and bias; 2 = relu; 3 = 2x2 max pool; 4 = 2x nearest upsample).
 * A JSON sidecar at <path>.json lists the layer names.
 */

const MAGIC = "STRAPW1\0";
const TAG_CONV = 1;
const TAG_RELU = 2;
const TAG_MAXPOOL = 3;
const TAG_UPSAMPLE = 4;

export interface ConvLayer {
  kind: "conv";
  /** [cout, cin, kh, kw] */
  dims: [number, number, number, number];
  /** row-major cout*cin*kh*kw kernel */
  weight: Float32Array;
  /** cout biases */
  bias: Float32Array;
}

export interface MarkerLayer {
  kind: "relu" | "maxpool" | "upsample";
}

export type Layer = ConvLayer | MarkerLayer;

export interface Network {
  encoder: Layer[];
  decoder: Layer[];
}

function layerBytes(layer: Layer): number {
  if (layer.kind !== "conv") return 1;
  return 1 + 16 + 4 * layer.weight.length + 4 * layer.bias.length;
}

export function writeWeights(net: Network, path: string): void {
  const layers = [...net.encoder, ...net.decoder];
  const total = 8 + 8 + layers.reduce((n, l) => n + layerBytes(l), 0);
  const buf = Buffer.alloc(total);
  buf.write(MAGIC, 0, "latin1");
  buf.writeUInt32LE(net.encoder.length, 8);
  buf.writeUInt32LE(net.decoder.length, 12);
  let off = 16;
  for (const layer of layers) {
    if (layer.kind === "conv") {
      const [cout, cin, kh, kw] = layer.dims;
      if (layer.weight.length !== cout * cin * kh * kw || layer.bias.length !== cout) {
        throw new RangeError(`conv buffers do not match dims ${layer.dims}`);
      }
      buf.writeUInt8(TAG_CONV, off); off += 1;
      for (const d of layer.dims) { buf.writeUInt32LE(d, off); off += 4; }
      for (const v of layer.weight) { buf.writeFloatLE(v, off); off += 4; }
      for (const v of layer.bias) { buf.writeFloatLE(v, off); off += 4; }
    } else {
      const tag = { relu: TAG_RELU, maxpool: TAG_MAXPOOL, upsample: TAG_UPSAMPLE }[layer.kind];
      buf.writeUInt8(tag, off); off += 1;
    }
  }
  fs.writeFileSync(path, buf);
  const names = layers.map((l) =>
    ({ conv: "Conv", relu: "ReLU", maxpool: "MaxPool", upsample: "Upsample" })[l.kind]);
  fs.writeFileSync(path + ".json", JSON.stringify({
    encoder_layers: net.encoder.length,
    decoder_layers: net.decoder.length,
    layers: names,
  }, null, 2));
}

export function readWeights(path: string): Network {
  const buf = fs.readFileSync(path);
  if (buf.length < 16 || buf.toString("latin1", 0, 8) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const nEnc = buf.readUInt32LE(8);
  const nDec = buf.readUInt32LE(12);
  let off = 16;
  const layers: Layer[] = [];
  for (let i = 0; i < nEnc + nDec; i++) {
    const tag = buf.readUInt8(off); off += 1;
    if (tag === TAG_CONV) {
      const dims: [number, number, number, number] = [
        buf.readUInt32LE(off), buf.readUInt32LE(off + 4),
        buf.readUInt32LE(off + 8), buf.readUInt32LE(off + 12),
      ];
      off += 16;
      const n = dims[0] * dims[1] * dims[2] * dims[3];
      const weight = new Float32Array(n);
      for (let k = 0; k < n; k++) { weight[k] = buf.readFloatLE(off); off += 4; }
      const bias = new Float32Array(dims[0]);
      for (let k = 0; k < dims[0]; k++) { bias[k] = buf.readFloatLE(off); off += 4; }
      layers.push({ kind: "conv", dims, weight, bias });
    } else if (tag === TAG_RELU) {
      layers.push({ kind: "relu" });
    } else if (tag === TAG_MAXPOOL) {
      layers.push({ kind: "maxpool" });
    } else if (tag === TAG_UPSAMPLE) {
      layers.push({ kind: "upsample" });
    } else {
      throw new Error(`${path}: unknown layer tag ${tag}`);
    }
  }
  if (off !== buf.length) throw new Error(`${path}: trailing bytes`);
  return { encoder: layers.slice(0, nEnc), decoder: layers.slice(nEnc) };
}

/** 1x1 identity convolutions; stylization with this net reproduces its input. */
export function identityNetwork(): Network {
  const eye = (): ConvLayer => {
    const weight = new Float32Array(9);
    weight[0] = 1; weight[4] = 1; weight[8] = 1; // (c, c, 0, 0) diagonal
    return { kind: "conv", dims: [3, 3, 1, 1], weight, bias: new Float32Array(3) };
  };
  return { encoder: [eye()], decoder: [eye()] };
}
