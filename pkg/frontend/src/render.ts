/**
 * HTML renderers. Every function maps a view model to a markup string and
 * touches no DOM, so the tests can assert on output directly. Interactive
 * elements carry data-action attributes; main.ts wires them up by
 * delegation.
 */

import type { Alert, EvidencePath, ExplanationTurn, Selection } from './api.js';
import { canSend, type ChatModel, type Turn } from './chat.js';
import { pinnedEmergencies, type DashboardModel } from './dashboard.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

/** Every node and predicate of the path, in traversal order. */
export function renderPath(path: EvidencePath): string {
  const parts: string[] = [`<span class="node">${escapeHtml(path.nodes[0] ?? '')}</span>`];
  path.edges.forEach((edge, i) => {
    parts.push(`<span class="predicate">-[${escapeHtml(edge.predicate)}]-&gt;</span>`);
    parts.push(`<span class="node">${escapeHtml(path.nodes[i + 1] ?? '')}</span>`);
  });
  return `<div class="evidence-path">${parts.join(' ')}</div>`;
}

function renderSelection(selection: Selection): string {
  const survivors = selection.survivors
    .map(
      (s) =>
        `<tr class="survivor${s.template_id === selection.chosen ? ' chosen' : ''}">` +
        `<td>${escapeHtml(s.template_id)}</td><td>${s.q.toFixed(3)}</td><td></td></tr>`,
    )
    .join('');
  const masked = selection.masked
    .map(
      (m) =>
        `<tr class="masked"><td>${escapeHtml(m.template_id)}</td><td>masked</td>` +
        `<td>${escapeHtml(m.violated)}</td></tr>`,
    )
    .join('');
  const mode = selection.explored ? 'explored' : 'greedy';
  return (
    `<table class="selection"><caption>state ${escapeHtml(selection.state)}, ${mode} pick: ` +
    `${escapeHtml(selection.chosen)}</caption>` +
    `<thead><tr><th>template</th><th>q</th><th>mask reason</th></tr></thead>` +
    `<tbody>${survivors}${masked}</tbody></table>`
  );
}

export function renderExplanation(turn: ExplanationTurn): string {
  const paths =
    turn.explanation.length > 0
      ? turn.explanation.map(renderPath).join('')
      : '<p class="placeholder">no evidence required</p>';
  const selection = turn.selection ? renderSelection(turn.selection) : '';
  return (
    `<section class="explanation" data-message="${escapeHtml(turn.message_id)}">` +
    `<h4>${escapeHtml(turn.message_id)}</h4>${paths}${selection}</section>`
  );
}

function renderTurn(m: ChatModel, turn: Turn): string {
  if (turn.role === 'error') {
    return `<div class="bubble error">${escapeHtml(turn.text)}</div>`;
  }
  if (turn.role === 'patient') {
    const waiting = turn.messageId === '' ? ' waiting' : '';
    return `<div class="bubble patient${waiting}">${escapeHtml(turn.text)}</div>`;
  }
  const used = turn.feedbackUsed ? ' disabled' : '';
  const feedback =
    `<span class="feedback">` +
    `<button data-action="feedback" data-signal="positive" data-message="${escapeHtml(turn.messageId)}"${used}>+1</button>` +
    `<button data-action="feedback" data-signal="negative" data-message="${escapeHtml(turn.messageId)}"${used}>-1</button>` +
    `</span>`;
  const explain =
    turn.explanation && turn.explanation.length > 0
      ? turn.explanation.map(renderPath).join('')
      : '';
  return (
    `<div class="bubble bot" data-message="${escapeHtml(turn.messageId)}">` +
    `${escapeHtml(turn.text)}${feedback}${explain}</div>`
  );
}

export function renderChat(m: ChatModel): string {
  const offline = m.offline ? '<div class="offline-banner">offline, message not sent</div>' : '';
  const turns = m.turns.map((t) => renderTurn(m, t)).join('');
  const disabled = canSend(m) ? '' : ' disabled';
  return (
    `<div class="chat">${offline}<div class="turns">${turns}</div>` +
    `<form class="composer" data-action="composer">` +
    `<input name="draft" value="${escapeHtml(m.draft)}" placeholder="Type a message" />` +
    `<button type="submit" data-action="send"${disabled}>Send</button>` +
    `</form></div>`
  );
}

function renderAlertRow(a: Alert, acknowledged: boolean): string {
  const mark = acknowledged ? ' acked' : '';
  return (
    `<li class="alert ${a.level}${mark}">` +
    `<span class="seq">#${a.seq}</span> <span class="level">${escapeHtml(a.level)}</span> ` +
    `${escapeHtml(a.triggering_node)} at ${escapeHtml(a.created_at)}</li>`
  );
}

/** Full-width banner for every unacknowledged emergency, on every route. */
export function renderBanner(pinned: Alert[]): string {
  if (pinned.length === 0) {
    return '';
  }
  const rows = pinned
    .map(
      (a) =>
        `<div class="emergency-banner" data-alert="${escapeHtml(a.alert_id)}">` +
        `EMERGENCY: severity node ${escapeHtml(a.triggering_node)} in session ${escapeHtml(a.session_id)} ` +
        `<button data-action="ack" data-alert="${escapeHtml(a.alert_id)}">Acknowledge</button></div>`,
    )
    .join('');
  return `<div class="banners">${rows}</div>`;
}

function graphSummary(tsv: string): string {
  const rows = tsv.split('\n').filter((line) => line !== '' && !line.startsWith('#'));
  return (
    `<details class="graph"><summary>patient graph, ${rows.length} triples</summary>` +
    `<pre>${escapeHtml(tsv)}</pre></details>`
  );
}

export function renderDashboard(m: DashboardModel): string {
  const feed =
    m.feed.alerts.length > 0
      ? `<ul class="alert-feed">${m.feed.alerts
          .map((a) => renderAlertRow(a, m.feed.acknowledged.has(a.alert_id)))
          .join('')}</ul>`
      : '<p class="placeholder">no alerts</p>';
  const turns =
    m.turns.length > 0
      ? m.turns.map(renderExplanation).join('')
      : '<p class="placeholder">no conversation yet</p>';
  return (
    `<div class="dashboard"><h3>Alerts for ${escapeHtml(m.patientId)}</h3>${feed}` +
    `<h3>Graph</h3>${graphSummary(m.graphTsv)}` +
    `<h3>Turn explanations</h3>${turns}</div>`
  );
}

export type Route = 'chat' | 'dashboard';

/** The emergency banner renders before the route view on both routes. */
export function renderApp(route: Route, chat: ChatModel, dashboard: DashboardModel): string {
  const banner = renderBanner(pinnedEmergencies(dashboard.feed));
  const nav =
    `<nav><a href="#/chat"${route === 'chat' ? ' class="active"' : ''}>Chat</a> ` +
    `<a href="#/dashboard"${route === 'dashboard' ? ' class="active"' : ''}>Dashboard</a></nav>`;
  const view = route === 'chat' ? renderChat(chat) : renderDashboard(dashboard);
  return `${banner}${nav}${view}`;
}
