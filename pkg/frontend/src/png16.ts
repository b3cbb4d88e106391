/**
 * Minimal PNG decoder for the service's grayscale payloads.
 *
 * Canvas decoding flattens 16-bit PNGs to 8 bits, which would break exact
 * client-side thresholding at 1/65535 granularity, so the similarity maps
 * (16-bit) and mask payloads (1-bit) are decoded here instead. Supports
 * non-interlaced grayscale at bit depths 1, 8, and 16 with all five scanline
 * filters; chunk CRCs are not verified.
 */

export interface GrayPng {
  width: number;
  height: number;
  bitDepth: number;
  /** One sample per pixel, row-major; 0/1 for 1-bit images. */
  data: Uint16Array;
}

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

async function inflate(compressed: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([compressed as BlobPart])
    .stream()
    .pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function unfilter(raw: Uint8Array, rowBytes: number, height: number, bpp: number): Uint8Array {
  const out = new Uint8Array(rowBytes * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (rowBytes + 1)];
    const src = y * (rowBytes + 1) + 1;
    const dst = y * rowBytes;
    for (let x = 0; x < rowBytes; x++) {
      const value = raw[src + x];
      const left = x >= bpp ? out[dst + x - bpp] : 0;
      const above = y > 0 ? out[dst + x - rowBytes] : 0;
      const upperLeft = y > 0 && x >= bpp ? out[dst + x - rowBytes - bpp] : 0;
      let recon: number;
      switch (filter) {
        case 0: recon = value; break;
        case 1: recon = value + left; break;
        case 2: recon = value + above; break;
        case 3: recon = value + ((left + above) >> 1); break;
        case 4: recon = value + paeth(left, above, upperLeft); break;
        default: throw new Error(`unsupported PNG filter ${filter}`);
      }
      out[dst + x] = recon & 0xff;
    }
  }
  return out;
}

export async function decodeGrayPng(bytes: Uint8Array): Promise<GrayPng> {
  if (bytes.length < 8 || PNG_SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let offset = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  const idat: Uint8Array[] = [];

  while (offset + 8 <= bytes.length) {
    const length = view.getUint32(offset);
    const type = String.fromCharCode(...bytes.subarray(offset + 4, offset + 8));
    const body = bytes.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      width = view.getUint32(offset + 8);
      height = view.getUint32(offset + 12);
      bitDepth = body[8];
      const colorType = body[9];
      const interlace = body[12];
      if (colorType !== 0) throw new Error(`expected grayscale PNG, got color type ${colorType}`);
      if (![1, 8, 16].includes(bitDepth)) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (interlace !== 0) throw new Error("interlaced PNG is not supported");
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length; // length + type + payload + crc
  }
  if (!width || !height) throw new Error("missing IHDR");

  const compressed = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let at = 0;
  for (const chunk of idat) {
    compressed.set(chunk, at);
    at += chunk.length;
  }
  const rowBytes = Math.ceil((width * bitDepth) / 8);
  const bpp = Math.max(1, bitDepth / 8);
  const raw = await inflate(compressed);
  if (raw.length < (rowBytes + 1) * height) throw new Error("truncated PNG data");
  const pixels = unfilter(raw, rowBytes, height, bpp);

  const data = new Uint16Array(width * height);
  if (bitDepth === 16) {
    for (let i = 0; i < width * height; i++) {
      data[i] = (pixels[2 * i] << 8) | pixels[2 * i + 1];
    }
  } else if (bitDepth === 8) {
    data.set(pixels.subarray(0, width * height));
  } else {
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        const byte = pixels[y * rowBytes + (x >> 3)];
        data[y * width + x] = (byte >> (7 - (x & 7))) & 1;
      }
    }
  }
  return { width, height, bitDepth, data };
}
