// Command signing. Must reproduce the canonical bytes fixed in WIRE.md:
// JSON with lexicographically sorted keys, ',' and ':' separators, UTF-8.

export interface CommandDoc {
  from: string;
  to: string;
  msg_type: string;
  payload: string; // hex-encoded UTF-8 JSON
  seq: number;
  signature?: string;
}

export function canonicalSigningText(doc: CommandDoc): string {
  // Key order is the sorted order: from, msg_type, payload, seq, to.
  return JSON.stringify({
    from: doc.from,
    msg_type: doc.msg_type,
    payload: doc.payload,
    seq: doc.seq,
    to: doc.to,
  });
}

export function toHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, '0')).join('');
}

export function fromHex(hex: string): Uint8Array {
  const clean = hex.trim();
  const out = new Uint8Array(clean.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(clean.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function encodePayload(payload: unknown): string {
  // Payload bodies use the same canonical JSON encoding before hexing.
  const sorted = (value: unknown): unknown => {
    if (Array.isArray(value)) return value.map(sorted);
    if (value !== null && typeof value === 'object') {
      const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
        a < b ? -1 : a > b ? 1 : 0,
      );
      return Object.fromEntries(entries.map(([k, v]) => [k, sorted(v)]));
    }
    return value;
  };
  return toHex(new TextEncoder().encode(JSON.stringify(sorted(payload))));
}

// Ed25519 raw 32-byte seeds wrap into this fixed PKCS#8 prefix.
const PKCS8_PREFIX = '302e020100300506032b657004220420';

export async function importSigningKey(seedHex: string): Promise<CryptoKey> {
  const pkcs8 = fromHex(PKCS8_PREFIX + seedHex.trim());
  return crypto.subtle.importKey('pkcs8', pkcs8.buffer as ArrayBuffer, { name: 'Ed25519' }, false, [
    'sign',
  ]);
}

export async function signCommand(
  key: CryptoKey,
  from: string,
  to: string,
  msgType: string,
  payload: unknown,
): Promise<CommandDoc> {
  const doc: CommandDoc = {
    from,
    to,
    msg_type: msgType,
    payload: encodePayload(payload),
    seq: Date.now(),
  };
  const bytes = new TextEncoder().encode(canonicalSigningText(doc));
  const signature = await crypto.subtle.sign({ name: 'Ed25519' }, key, bytes);
  doc.signature = toHex(new Uint8Array(signature));
  return doc;
}
