import { webcrypto } from 'node:crypto';
import { describe, expect, it } from 'vitest';

import {
  canonicalSigningText,
  encodePayload,
  fromHex,
  importSigningKey,
  signCommand,
  toHex,
} from '../src/sign.js';

describe('canonical signing bytes', () => {
  it('matches the WIRE.md fixture byte for byte', () => {
    // Same document as the server-side canonical encoding test vector.
    const text = canonicalSigningText({
      from: 'alice',
      to: 'comverse://sim/alice',
      msg_type: 'cmd-share',
      payload: '7b7d',
      seq: 12,
    });
    expect(text).toBe(
      '{"from":"alice","msg_type":"cmd-share","payload":"7b7d","seq":12,"to":"comverse://sim/alice"}',
    );
  });

  it('encodes payloads with sorted keys and no whitespace', () => {
    const hex = encodePayload({ revoke: false, community_id: 'c', datasets: ['a'] });
    const text = new TextDecoder().decode(fromHex(hex));
    expect(text).toBe('{"community_id":"c","datasets":["a"],"revoke":false}');
  });

  it('hex helpers round trip', () => {
    const bytes = new Uint8Array([0, 1, 254, 255]);
    expect(fromHex(toHex(bytes))).toEqual(bytes);
  });
});

describe('command signing', () => {
  it('produces a signature Ed25519 verification accepts', async () => {
    const seed = '07'.repeat(32);
    const key = await importSigningKey(seed);
    const doc = await signCommand(key, 'alice', 'comverse://sim/alice', 'cmd-share', {
      community_id: 'c',
      datasets: [],
      revoke: false,
    });
    expect(doc.signature).toMatch(/^[0-9a-f]{128}$/);

    // Independent verification via the node crypto public half.
    const pkcs8 = fromHex('302e020100300506032b657004220420' + seed);
    const priv = await webcrypto.subtle.importKey('pkcs8', pkcs8, { name: 'Ed25519' }, true, [
      'sign',
    ]);
    const jwk = await webcrypto.subtle.exportKey('jwk', priv);
    const pub = await webcrypto.subtle.importKey(
      'jwk',
      { kty: 'OKP', crv: 'Ed25519', x: jwk.x },
      { name: 'Ed25519' },
      false,
      ['verify'],
    );
    const ok = await webcrypto.subtle.verify(
      { name: 'Ed25519' },
      pub,
      fromHex(doc.signature!),
      new TextEncoder().encode(canonicalSigningText(doc)),
    );
    expect(ok).toBe(true);
  });
});
