import { describe, expect, it } from 'vitest';

import {
  renderCommunities,
  renderErrorBanner,
  renderMembers,
  renderRequestQueue,
  renderShareControls,
} from '../src/render.js';
import type { CommunityDoc, JoinRequestDoc, MemberDoc } from '../src/types.js';

const request: JoinRequestDoc = {
  member_id: 'gate-cam.demo-hq',
  name: 'gate-cam',
  address: 'comverse://sim/gate-cam.demo-hq',
  received_at: 120,
};

function member(overrides: Partial<MemberDoc>): MemberDoc {
  return {
    member_id: 'porch-cam.demo-hq',
    name: 'porch-cam',
    address: 'comverse://sim/porch-cam.demo-hq',
    status: 'active',
    sharing: 'active',
    joined_at: 0,
    token_expires_at: 3600,
    token_fresh: true,
    ...overrides,
  };
}

function community(overrides: Partial<CommunityDoc>): CommunityDoc {
  return {
    community_id: 'city-net',
    name: 'City Network',
    address: 'comverse://sim/city-net',
    share_status: 'active',
    member_fed_id: 'demo-hq.city-net',
    token_issued_at: 0,
    token_expires_at: 3600,
    acl: [],
    ...overrides,
  };
}

describe('request queue view', () => {
  it('renders an explicit empty state with no action buttons', () => {
    const html = renderRequestQueue([], new Set());
    expect(html).toContain('No pending join requests');
    expect(html).not.toContain('<button');
  });

  it('renders approve and deny actions per request', () => {
    const html = renderRequestQueue([request], new Set());
    expect(html).toContain('data-action="approve"');
    expect(html).toContain('data-action="deny"');
    expect(html).toContain('data-member-id="gate-cam.demo-hq"');
  });

  it('disables controls while an action is in flight', () => {
    const html = renderRequestQueue([request], new Set(['gate-cam.demo-hq']));
    expect(html).toContain('disabled');
    expect(html).toContain('sending…');
  });
});

describe('members view', () => {
  it('highlights stale members', () => {
    const html = renderMembers([member({ status: 'stale' })], 0);
    expect(html).toContain('row-stale');
    expect(html).toContain('status-stale');
  });

  it('reports token freshness from the API document only', () => {
    const html = renderMembers([member({ token_expires_at: 500, token_fresh: true })], 100);
    expect(html).toContain('expires in 400s');
    const expired = renderMembers([member({ token_fresh: false })], 100);
    expect(expired).toContain('expired');
  });

  it('has an empty state', () => {
    expect(renderMembers([], 0)).toContain('No members yet');
  });
});

describe('communities view', () => {
  it('lists ACL rules and share status', () => {
    const html = renderCommunities(
      [community({ acl: [{ pattern: 'air_quality/*', permission: 'read' }] })],
      50,
    );
    expect(html).toContain('air_quality/*:read');
    expect(html).toContain('status-active');
    expect(html).toContain('issued 50s ago');
  });
});

describe('share controls view', () => {
  it('offers pause and revoke for an active membership', () => {
    const html = renderShareControls([community({})], new Set());
    expect(html).toContain('data-action="pause"');
    expect(html).toContain('data-action="revoke"');
  });

  it('offers resume with a dataset input for a paused membership', () => {
    const html = renderShareControls([community({ share_status: 'paused' })], new Set());
    expect(html).toContain('data-action="resume"');
    expect(html).toContain('dataset-input');
  });

  it('shows no controls for a revoked membership', () => {
    const html = renderShareControls([community({ share_status: 'revoked' })], new Set());
    expect(html).not.toContain('data-action=');
  });
});

describe('error banner', () => {
  it('is empty when there is no error', () => {
    expect(renderErrorBanner(null, false)).toBe('');
  });

  it('flags stale data without hiding the page', () => {
    const html = renderErrorBanner('connection refused', true);
    expect(html).toContain('connection refused');
    expect(html).toContain('last known data');
  });

  it('escapes error text', () => {
    expect(renderErrorBanner('<script>', false)).toContain('&lt;script&gt;');
  });
});
