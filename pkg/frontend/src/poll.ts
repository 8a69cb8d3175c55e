/**
 * Alert polling loop. One poll step is a pure-ish function over the feed,
 * so the exactly-once behavior is testable without timers; the loop just
 * repeats it on an interval and swallows network blips (the cursor only
 * moves on a successful merge, so nothing is ever skipped).
 */

import type { Alert } from './api.js';
import { mergeAlerts, type AlertFeed } from './dashboard.js';

export const DEFAULT_POLL_MS = 2000;

/** Anything that can answer a since-seq alert query (ApiClient does). */
export interface AlertSource {
  alerts(sinceSeq: number): Promise<Alert[]>;
}

export async function pollOnce(client: AlertSource, feed: AlertFeed): Promise<AlertFeed> {
  return mergeAlerts(feed, await client.alerts(feed.cursor));
}

export function startAlertPolling(
  client: AlertSource,
  getFeed: () => AlertFeed,
  setFeed: (feed: AlertFeed) => void,
  intervalMs: number = DEFAULT_POLL_MS,
): () => void {
  let stopped = false;
  let inFlight = false;
  const tick = async () => {
    if (stopped || inFlight) {
      return;
    }
    inFlight = true;
    try {
      setFeed(await pollOnce(client, getFeed()));
    } catch {
      // offline or restarting service: keep the cursor, retry next tick
    } finally {
      inFlight = false;
    }
  };
  void tick();
  const handle = setInterval(tick, intervalMs);
  return () => {
    stopped = true;
    clearInterval(handle);
  };
}
