/**
 * Clinician dashboard state: the polled alert feed, acknowledged-alert
 * bookkeeping, and the per-session explanation turns. The feed merge is
 * keyed by the service's alert seq, so a poll overlap can never duplicate
 * an entry and a cursor can never skip one.
 */

import type { Alert, ExplanationTurn } from './api.js';

export interface AlertFeed {
  /** Highest seq seen; the next poll asks for alerts after this. */
  cursor: number;
  alerts: Alert[];
  acknowledged: ReadonlySet<string>;
}

export function emptyFeed(acknowledged: Iterable<string> = []): AlertFeed {
  return { cursor: 0, alerts: [], acknowledged: new Set(acknowledged) };
}

/** Exactly-once by seq: known seqs are dropped, the rest enter in order. */
export function mergeAlerts(feed: AlertFeed, incoming: Alert[]): AlertFeed {
  if (incoming.length === 0) {
    return feed;
  }
  const seen = new Set(feed.alerts.map((a) => a.seq));
  const fresh = incoming.filter((a) => !seen.has(a.seq) && (seen.add(a.seq), true));
  if (fresh.length === 0) {
    return feed;
  }
  const alerts = [...feed.alerts, ...fresh].sort((a, b) => a.seq - b.seq);
  const cursor = Math.max(feed.cursor, ...fresh.map((a) => a.seq));
  return { ...feed, cursor, alerts };
}

export function acknowledgeAlert(feed: AlertFeed, alertId: string): AlertFeed {
  if (feed.acknowledged.has(alertId)) {
    return feed;
  }
  const acknowledged = new Set(feed.acknowledged);
  acknowledged.add(alertId);
  return { ...feed, acknowledged };
}

/** Emergencies stay pinned (bannered on every view) until acknowledged. */
export function pinnedEmergencies(feed: AlertFeed): Alert[] {
  return feed.alerts.filter((a) => a.level === 'emergency' && !feed.acknowledged.has(a.alert_id));
}

export interface DashboardModel {
  patientId: string;
  feed: AlertFeed;
  graphTsv: string;
  turns: ExplanationTurn[];
}

export function initialDashboard(patientId: string, acknowledged: Iterable<string> = []): DashboardModel {
  return { patientId, feed: emptyFeed(acknowledged), graphTsv: '', turns: [] };
}
