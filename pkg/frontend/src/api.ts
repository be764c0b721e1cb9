// Typed client over the fedlet HTTP API. The console holds no authority of
// its own: every mutation is a signed command the fedlet verifies.

import { importSigningKey, signCommand } from './sign.js';
import type {
  CommunityDoc,
  ConsoleConfig,
  JoinRequestDoc,
  MemberDoc,
  StatusDoc,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorClass: string,
    detail: string,
  ) {
    super(`${errorClass}: ${detail}`);
  }

  get unauthorized(): boolean {
    return this.status === 401;
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let errorClass = 'http-error';
  let detail = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    errorClass = body.error ?? errorClass;
    detail = body.detail ?? detail;
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(resp.status, errorClass, detail);
}

export class FedletClient {
  private key: CryptoKey | null = null;

  constructor(private config: ConsoleConfig) {}

  private async signingKey(): Promise<CryptoKey> {
    if (this.key === null) {
      this.key = await importSigningKey(this.config.seedHex);
    }
    return this.key;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.config.baseUrl + path);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private async command(path: string, msgType: string, payload: unknown): Promise<unknown> {
    const doc = await signCommand(
      await this.signingKey(),
      this.config.fedId,
      this.config.address,
      msgType,
      payload,
    );
    const resp = await fetch(this.config.baseUrl + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(doc),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp.json();
  }

  status(): Promise<StatusDoc> {
    return this.get('/status');
  }

  async members(): Promise<{ members: MemberDoc[]; now: number }> {
    return this.get('/members');
  }

  async communities(): Promise<{ communities: CommunityDoc[]; now: number }> {
    return this.get('/communities');
  }

  async requests(): Promise<JoinRequestDoc[]> {
    const doc = await this.get<{ requests: JoinRequestDoc[] }>('/requests');
    return doc.requests;
  }

  approve(memberId: string): Promise<unknown> {
    return this.command(`/requests/${memberId}/approve`, 'cmd-approve', {
      member_id: memberId,
    });
  }

  deny(memberId: string): Promise<unknown> {
    return this.command(`/requests/${memberId}/deny`, 'cmd-deny', { member_id: memberId });
  }

  share(communityId: string, datasets: string[]): Promise<unknown> {
    return this.command('/share', 'cmd-share', {
      community_id: communityId,
      datasets,
      revoke: false,
    });
  }

  pause(communityId: string): Promise<unknown> {
    return this.share(communityId, []);
  }

  revoke(communityId: string): Promise<unknown> {
    return this.command('/share', 'cmd-share', {
      community_id: communityId,
      datasets: [],
      revoke: true,
    });
  }
}
