// App shell: poll the fedlet every 2s, render the active view, and map
// clicks to signed commands with optimistic-then-confirmed updates.

import { ApiError, FedletClient } from './api.js';
import {
  renderCommunities,
  renderErrorBanner,
  renderIdentitySetup,
  renderMembers,
  renderRequestQueue,
  renderShareControls,
} from './render.js';
import type { CommunityDoc, ConsoleConfig, JoinRequestDoc, MemberDoc } from './types.js';

const POLL_INTERVAL_MS = 2000;
const CONFIG_KEY = 'comverse-console-config';

type ViewName = 'request-queue' | 'members' | 'communities' | 'share-controls';

interface State {
  view: ViewName;
  requests: JoinRequestDoc[];
  members: MemberDoc[];
  communities: CommunityDoc[];
  now: number;
  error: string | null;
  staleData: boolean;
  busy: Set<string>; // ids with an optimistic action in flight
}

export class ConsoleApp {
  state: State = {
    view: 'request-queue',
    requests: [],
    members: [],
    communities: [],
    now: 0,
    error: null,
    staleData: false,
    busy: new Set(),
  };
  private client: FedletClient | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private root: HTMLElement,
    config: ConsoleConfig | null,
  ) {
    if (config) this.client = new FedletClient(config);
  }

  start(): void {
    if (!this.client) {
      this.root.innerHTML = renderIdentitySetup('Configure the fedlet this console operates.');
      return;
    }
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
  }

  async refresh(): Promise<void> {
    if (!this.client) return;
    try {
      const [requests, membersDoc, communitiesDoc] = await Promise.all([
        this.client.requests(),
        this.client.members(),
        this.client.communities(),
      ]);
      this.state.requests = requests;
      this.state.members = membersDoc.members;
      this.state.communities = communitiesDoc.communities;
      this.state.now = membersDoc.now;
      this.state.error = null;
      this.state.staleData = false;
    } catch (err) {
      // Non-blocking: keep the last known data, flag it as stale.
      this.state.error = err instanceof Error ? err.message : String(err);
      this.state.staleData = true;
    }
    this.render();
  }

  render(): void {
    const { state } = this;
    const banner = renderErrorBanner(state.error, state.staleData);
    let body: string;
    switch (state.view) {
      case 'request-queue':
        body = renderRequestQueue(state.requests, state.busy);
        break;
      case 'members':
        body = renderMembers(state.members, state.now);
        break;
      case 'communities':
        body = renderCommunities(state.communities, state.now);
        break;
      case 'share-controls':
        body = renderShareControls(state.communities, state.busy);
        break;
    }
    this.root.innerHTML = `${banner}<nav class="tabs">${this.renderTabs()}</nav><main>${body}</main>`;
  }

  private renderTabs(): string {
    const tabs: [ViewName, string][] = [
      ['request-queue', `Requests (${this.state.requests.length})`],
      ['members', `Members (${this.state.members.length})`],
      ['communities', `Communities (${this.state.communities.length})`],
      ['share-controls', 'Sharing'],
    ];
    return tabs
      .map(
        ([view, label]) =>
          `<button class="tab${view === this.state.view ? ' active' : ''}" data-view="${view}">${label}</button>`,
      )
      .join('');
  }

  async handleClick(target: HTMLElement): Promise<void> {
    const view = target.dataset.view as ViewName | undefined;
    if (view) {
      this.state.view = view;
      this.render();
      return;
    }
    const action = target.dataset.action;
    if (!action || !this.client) return;
    const memberId = target.dataset.memberId;
    const communityId = target.dataset.communityId;
    const subject = memberId ?? communityId ?? '';
    this.state.busy.add(subject);
    this.render(); // optimistic: controls disable immediately
    try {
      if (action === 'approve' && memberId) await this.client.approve(memberId);
      else if (action === 'deny' && memberId) await this.client.deny(memberId);
      else if (action === 'pause' && communityId) await this.client.pause(communityId);
      else if (action === 'revoke' && communityId) await this.client.revoke(communityId);
      else if (action === 'resume' && communityId) {
        const input = this.root.querySelector<HTMLInputElement>(
          `input.dataset-input[data-community-id="${communityId}"]`,
        );
        const datasets = (input?.value ?? '')
          .split(',')
          .map((d) => d.trim())
          .filter(Boolean);
        await this.client.share(communityId, datasets);
      }
    } catch (err) {
      if (err instanceof ApiError && err.unauthorized) {
        this.stop();
        this.root.innerHTML = renderIdentitySetup('The fedlet rejected this identity key.');
        return;
      }
      this.state.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.state.busy.delete(subject);
    }
    await this.refresh(); // confirmed state comes from the API, never guessed
  }
}

export function loadConfig(storage: Storage): ConsoleConfig | null {
  const raw = storage.getItem(CONFIG_KEY);
  if (!raw) return null;
  try {
    return JSON.parse(raw) as ConsoleConfig;
  } catch {
    return null;
  }
}

export function saveConfigFromSetup(storage: Storage, addressRaw: string, seedHex: string): void {
  const match = /^comverse:\/\/([^:/]+)(?::(\d+))?\/(.+)$/.exec(addressRaw.trim());
  if (!match) throw new Error('address must look like comverse://host:port/fed_id');
  const [, host, port, fedId] = match;
  const config: ConsoleConfig = {
    baseUrl: `http://${host}:${port ?? '80'}`,
    fedId,
    address: addressRaw.trim(),
    seedHex: seedHex.trim(),
  };
  storage.setItem(CONFIG_KEY, JSON.stringify(config));
}

export function mount(root: HTMLElement, storage: Storage): ConsoleApp {
  const app = new ConsoleApp(root, loadConfig(storage));
  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === 'save-setup') {
      const address = root.querySelector<HTMLInputElement>('#setup-address')?.value ?? '';
      const seed = root.querySelector<HTMLInputElement>('#setup-seed')?.value ?? '';
      try {
        saveConfigFromSetup(storage, address, seed);
        location.reload();
      } catch (err) {
        alert(err instanceof Error ? err.message : String(err));
      }
      return;
    }
    void app.handleClick(target);
  });
  app.start();
  return app;
}
