// Documents served by the fedlet HTTP API (field names fixed in WIRE.md).

export interface MemberDoc {
  member_id: string;
  name: string;
  address: string;
  status: 'pending' | 'active' | 'stale' | 'left';
  sharing: 'active' | 'paused' | 'revoked';
  joined_at: number;
  token_expires_at: number | null;
  token_fresh: boolean;
}

export interface AclRuleDoc {
  pattern: string;
  permission: string;
}

export interface CommunityDoc {
  community_id: string;
  name: string;
  address: string;
  share_status: 'active' | 'paused' | 'revoked';
  member_fed_id: string;
  token_issued_at: number;
  token_expires_at: number;
  acl: AclRuleDoc[];
}

export interface JoinRequestDoc {
  member_id: string;
  name: string;
  address: string;
  received_at: number;
}

export interface StatusDoc {
  fed_id: string;
  name: string;
  address: string;
  hosts_community: boolean;
  now: number;
  members: number;
  communities: number;
  pending_requests: number;
}

export interface ConsoleConfig {
  baseUrl: string; // http://host:port of the fedlet web service
  fedId: string; // the fedlet's own fedID (commands are signed as it)
  address: string; // comverse://host:port/fed_id
  seedHex: string; // operator identity key seed (hex)
}
