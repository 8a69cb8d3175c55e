import { describe, expect, it } from 'vitest';

import type { Alert, EvidencePath, ExplanationTurn } from '../src/api.js';
import { editDraft, initialChat, replyArrived, sendStarted, sessionOpened, feedbackGiven } from '../src/chat.js';
import { acknowledgeAlert, initialDashboard, mergeAlerts } from '../src/dashboard.js';
import { escapeHtml, renderApp, renderBanner, renderChat, renderDashboard, renderExplanation, renderPath } from '../src/render.js';

const threeHop: EvidencePath = {
  nodes: ['patient:p1', 'kb:sertraline', 'kb:c0074393', 'kb:c0012833'],
  edges: [
    { subject: 'patient:p1', predicate: 'takes', object: 'kb:sertraline' },
    { subject: 'kb:sertraline', predicate: 'same_as', object: 'kb:c0074393' },
    { subject: 'kb:c0074393', predicate: 'has_side_effect', object: 'kb:c0012833' },
  ],
};

function explanationTurn(overrides: Partial<ExplanationTurn> = {}): ExplanationTurn {
  return {
    message_id: 's0001-m002',
    in_reply_to: 's0001-m001',
    selection: null,
    explanation: [],
    ...overrides,
  };
}

describe('renderPath', () => {
  it('walks every node and predicate in order', () => {
    const html = renderPath(threeHop);
    const order = [
      'patient:p1',
      '-[takes]-&gt;',
      'kb:sertraline',
      '-[same_as]-&gt;',
      'kb:c0074393',
      '-[has_side_effect]-&gt;',
      'kb:c0012833',
    ];
    let at = -1;
    for (const token of order) {
      const next = html.indexOf(token, at + 1);
      expect(next, `missing or misplaced: ${token}`).toBeGreaterThan(at);
      at = next;
    }
    expect(html.match(/class="node"/g)).toHaveLength(4);
    expect(html.match(/class="predicate"/g)).toHaveLength(3);
  });
});

describe('renderExplanation', () => {
  it('says so when a turn needed no evidence', () => {
    const html = renderExplanation(explanationTurn());
    expect(html).toContain('no evidence required');
  });

  it('shows q values, marks the chosen template, and names the violated rule', () => {
    const html = renderExplanation(
      explanationTurn({
        selection: {
          state: 'hypothesis:present',
          chosen: 't_supportive',
          explored: false,
          survivors: [
            { template_id: 't_supportive', q: 0.812 },
            { template_id: 't_neutral', q: 0.25 },
          ],
          masked: [{ template_id: 't_med_advice', violated: 'med_requires_prescription' }],
        },
        explanation: [threeHop],
      }),
    );
    expect(html).toContain('greedy pick: t_supportive');
    expect(html).toContain('0.812');
    expect(html).toContain('0.250');
    expect(html).toContain('class="survivor chosen"');
    expect(html).toContain('class="masked"');
    expect(html).toContain('med_requires_prescription');
    expect(html).toContain('has_side_effect');
  });

  it('labels an exploration pick as explored', () => {
    const html = renderExplanation(
      explanationTurn({
        selection: {
          state: 'smalltalk',
          chosen: 't_terse',
          explored: true,
          survivors: [{ template_id: 't_terse', q: 0.1 }],
          masked: [],
        },
      }),
    );
    expect(html).toContain('explored pick: t_terse');
  });
});

function emergency(seq: number): Alert {
  return {
    alert_id: `a${String(seq).padStart(4, '0')}`,
    session_id: 's0001',
    level: 'emergency',
    triggering_node: 'n5_plan',
    evidence: { message_id: 's0001-m003', phrase: 'plan to', score: 0.97 },
    created_at: '2025-01-01T00:00:07Z',
    acknowledged: false,
    seq,
  };
}

describe('emergency banner', () => {
  it('shows on both routes until acknowledged; the feed row stays, marked acked', () => {
    const chat = sessionOpened(initialChat(), 's0001');
    let dash = initialDashboard('p1');
    dash = { ...dash, feed: mergeAlerts(dash.feed, [emergency(1)]) };

    for (const route of ['chat', 'dashboard'] as const) {
      const html = renderApp(route, chat, dash);
      expect(html).toContain('emergency-banner');
      expect(html.indexOf('emergency-banner')).toBeLessThan(html.indexOf('<nav>'));
      expect(html).toContain('data-action="ack"');
    }

    dash = { ...dash, feed: acknowledgeAlert(dash.feed, 'a0001') };
    for (const route of ['chat', 'dashboard'] as const) {
      expect(renderApp(route, chat, dash)).not.toContain('emergency-banner');
    }
    const feedHtml = renderDashboard(dash);
    expect(feedHtml).toContain('class="alert emergency acked"');
  });

  it('renders one banner per pinned emergency', () => {
    const html = renderBanner([emergency(1), emergency(2)]);
    expect(html.match(/emergency-banner/g)).toHaveLength(2);
  });

  it('renders nothing with no pins', () => {
    expect(renderBanner([])).toBe('');
  });
});

describe('chat controls', () => {
  it('disables send until the draft, session, and pipeline allow it', () => {
    expect(renderChat(initialChat())).toContain('data-action="send" disabled');
    const ready = editDraft(sessionOpened(initialChat(), 's0001'), 'hello');
    expect(renderChat(ready)).toContain('data-action="send">');
    expect(renderChat(sendStarted(ready))).toContain('data-action="send" disabled');
  });

  it('disables the feedback buttons once used', () => {
    let m = replyArrived(sendStarted(editDraft(sessionOpened(initialChat(), 's0001'), 'hi')), {
      message_id: 's0001-m002',
      in_reply_to: 's0001-m001',
      reply: 'hello',
      action_type: 'smalltalk',
      explanation: [],
      alerts: [],
    });
    expect(renderChat(m)).toContain('data-message="s0001-m002">+1');
    m = feedbackGiven(m, 's0001-m002');
    expect(renderChat(m)).toContain('data-message="s0001-m002" disabled>+1');
  });

  it('shows the offline banner only when offline', () => {
    expect(renderChat(initialChat())).not.toContain('offline-banner');
    expect(renderChat({ ...initialChat(), offline: true })).toContain('offline-banner');
  });
});

describe('escaping', () => {
  it('neutralizes markup in patient text end to end', () => {
    const hostile = '<img src=x onerror="alert(1)">';
    const m = replyArrived(sendStarted(editDraft(sessionOpened(initialChat(), 's0001'), hostile)), {
      message_id: 's0001-m002',
      in_reply_to: 's0001-m001',
      reply: 'noted',
      action_type: 'smalltalk',
      explanation: [],
      alerts: [],
    });
    const html = renderChat(m);
    expect(html).not.toContain('<img');
    expect(html).toContain('&lt;img src=x onerror=&quot;alert(1)&quot;&gt;');
  });

  it('escapeHtml covers the five specials', () => {
    expect(escapeHtml(`&<>"'`)).toBe('&amp;&lt;&gt;&quot;&#39;');
  });
});
