// Pure view renderers: state in, HTML string out. The app shell swaps these
// into the page and wires click handlers by data attributes.

import type { CommunityDoc, JoinRequestDoc, MemberDoc } from './types.js';

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderErrorBanner(message: string | null, staleData: boolean): string {
  if (!message) return '';
  const staleNote = staleData ? ' <span class="stale-indicator">showing last known data</span>' : '';
  return `<div class="banner error" role="alert">${esc(message)}${staleNote}</div>`;
}

export function renderRequestQueue(requests: JoinRequestDoc[], busy: Set<string>): string {
  if (requests.length === 0) {
    return `<div class="empty-state">No pending join requests.</div>`;
  }
  const rows = requests
    .map((req) => {
      const disabled = busy.has(req.member_id) ? ' disabled' : '';
      const pendingNote = busy.has(req.member_id) ? '<span class="pending-note">sending…</span>' : '';
      return `
      <tr>
        <td>${esc(req.member_id)}</td>
        <td>${esc(req.name)}</td>
        <td>${req.received_at}</td>
        <td>
          <button class="approve" data-action="approve" data-member-id="${esc(req.member_id)}"${disabled}>Approve</button>
          <button class="deny" data-action="deny" data-member-id="${esc(req.member_id)}"${disabled}>Deny</button>
          ${pendingNote}
        </td>
      </tr>`;
    })
    .join('');
  return `
  <table class="data-table">
    <thead><tr><th>Member</th><th>Name</th><th>Received</th><th>Actions</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderMembers(members: MemberDoc[], now: number): string {
  if (members.length === 0) {
    return `<div class="empty-state">No members yet.</div>`;
  }
  const rows = members
    .map((member) => {
      const staleClass = member.status === 'stale' ? ' class="row-stale"' : '';
      const freshness = member.token_expires_at === null
        ? 'no token'
        : member.token_fresh
          ? `fresh (expires in ${member.token_expires_at - now}s)`
          : 'expired';
      return `
      <tr${staleClass}>
        <td>${esc(member.member_id)}</td>
        <td><span class="status status-${member.status}">${member.status}</span></td>
        <td>${member.sharing}</td>
        <td>${esc(freshness)}</td>
        <td>${member.joined_at}</td>
      </tr>`;
    })
    .join('');
  return `
  <table class="data-table">
    <thead><tr><th>Member</th><th>Status</th><th>Sharing</th><th>Token</th><th>Joined</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderCommunities(communities: CommunityDoc[], now: number): string {
  if (communities.length === 0) {
    return `<div class="empty-state">This fedlet has not joined any communities.</div>`;
  }
  const rows = communities
    .map((community) => {
      const acl = community.acl.map((r) => `${r.pattern}:${r.permission}`).join(', ') || '(none)';
      const tokenAge = now - community.token_issued_at;
      return `
      <tr>
        <td>${esc(community.community_id)}</td>
        <td>${esc(community.name)}</td>
        <td><span class="status status-${community.share_status}">${community.share_status}</span></td>
        <td>${esc(acl)}</td>
        <td>issued ${tokenAge}s ago</td>
      </tr>`;
    })
    .join('');
  return `
  <table class="data-table">
    <thead><tr><th>Community</th><th>Name</th><th>Sharing</th><th>ACL</th><th>Token</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderShareControls(communities: CommunityDoc[], busy: Set<string>): string {
  if (communities.length === 0) {
    return `<div class="empty-state">Nothing to control: no community memberships.</div>`;
  }
  const rows = communities
    .map((community) => {
      const id = esc(community.community_id);
      const disabled = busy.has(community.community_id) ? ' disabled' : '';
      const revoked = community.share_status === 'revoked';
      const toggle =
        community.share_status === 'active'
          ? `<button data-action="pause" data-community-id="${id}"${disabled}>Pause</button>`
          : revoked
            ? `<span class="status status-revoked">revoked</span>`
            : `<input class="dataset-input" data-community-id="${id}" placeholder="datasets, comma separated" />
               <button data-action="resume" data-community-id="${id}"${disabled}>Resume</button>`;
      const revokeButton = revoked
        ? ''
        : `<button class="deny" data-action="revoke" data-community-id="${id}"${disabled}>Revoke</button>`;
      return `
      <tr>
        <td>${id}</td>
        <td><span class="status status-${community.share_status}">${community.share_status}</span></td>
        <td>${toggle} ${revokeButton}</td>
      </tr>`;
    })
    .join('');
  return `
  <table class="data-table">
    <thead><tr><th>Community</th><th>Sharing</th><th>Controls</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderIdentitySetup(message: string): string {
  return `
  <div class="setup">
    <h2>Identity setup</h2>
    <p>${esc(message)}</p>
    <label>Fedlet address <input id="setup-address" placeholder="comverse://127.0.0.1:8300/demo-hq" /></label>
    <label>Identity key (hex seed) <input id="setup-seed" type="password" /></label>
    <button id="setup-save" data-action="save-setup">Save</button>
  </div>`;
}
