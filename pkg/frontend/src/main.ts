/**
 * Browser entry point: owns the mutable model, wires DOM events to the pure
 * transition functions, and repaints from the render functions. The API base
 * comes from `window.ALLEVIATE_API`, a `?api=` query parameter, or defaults
 * to the page's own origin.
 */

import { ApiClient, ServiceError } from './api.js';
import * as chat from './chat.js';
import { acknowledgeAlert, initialDashboard, type DashboardModel } from './dashboard.js';
import { startAlertPolling } from './poll.js';
import { renderApp, type Route } from './render.js';

const ACK_KEY = 'alleviate.acknowledged';

function loadAcks(): string[] {
  try {
    return JSON.parse(localStorage.getItem(ACK_KEY) ?? '[]');
  } catch {
    return [];
  }
}

function saveAcks(feed: DashboardModel['feed']): void {
  localStorage.setItem(ACK_KEY, JSON.stringify([...feed.acknowledged]));
}

function currentRoute(): Route {
  return location.hash === '#/dashboard' ? 'dashboard' : 'chat';
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const base = (window as { ALLEVIATE_API?: string }).ALLEVIATE_API ?? params.get('api') ?? '';
  const patientId = params.get('patient') ?? 'p1';
  const client = new ApiClient(base);
  const root = document.getElementById('app');
  if (!root) {
    throw new Error('missing #app mount point');
  }

  let chatModel = chat.initialChat();
  let dash = initialDashboard(patientId, loadAcks());

  const paint = () => {
    root.innerHTML = renderApp(currentRoute(), chatModel, dash);
    const input = root.querySelector<HTMLInputElement>('.composer input[name=draft]');
    if (input && document.activeElement !== input) {
      input.value = chatModel.draft;
    }
  };

  const refreshDashboard = async () => {
    try {
      dash = { ...dash, graphTsv: await client.patientGraph(patientId) };
      if (chatModel.sessionId) {
        dash = { ...dash, turns: await client.explanations(chatModel.sessionId) };
      }
    } catch {
      // dashboard data is best-effort; the poll loop keeps alerts fresh
    }
    paint();
  };

  const send = async () => {
    if (!chat.canSend(chatModel)) {
      return;
    }
    const sessionId = chatModel.sessionId as string;
    const text = chatModel.draft;
    chatModel = chat.sendStarted(chatModel);
    paint();
    try {
      chatModel = chat.replyArrived(chatModel, await client.sendMessage(sessionId, text));
    } catch (err) {
      chatModel =
        err instanceof ServiceError
          ? chat.sendFailed(chatModel, 'rejected', err.message)
          : chat.sendFailed(chatModel, 'offline', String(err));
    }
    paint();
    void refreshDashboard();
  };

  root.addEventListener('submit', (event) => {
    event.preventDefault();
    void send();
  });

  root.addEventListener('input', (event) => {
    const target = event.target as HTMLInputElement;
    if (target.name === 'draft') {
      chatModel = chat.editDraft(chatModel, target.value);
      const button = root.querySelector<HTMLButtonElement>('[data-action=send]');
      if (button) {
        button.disabled = !chat.canSend(chatModel);
      }
    }
  });

  root.addEventListener('click', (event) => {
    const el = (event.target as HTMLElement).closest<HTMLElement>('[data-action]');
    if (!el) {
      return;
    }
    if (el.dataset.action === 'ack') {
      dash = { ...dash, feed: acknowledgeAlert(dash.feed, el.dataset.alert ?? '') };
      saveAcks(dash.feed);
      paint();
    }
    if (el.dataset.action === 'feedback' && chatModel.sessionId) {
      const sessionId = chatModel.sessionId;
      const messageId = el.dataset.message ?? '';
      if (!chat.canGiveFeedback(chatModel, messageId)) {
        return;
      }
      chatModel = chat.feedbackGiven(chatModel, messageId);
      paint();
      void client
        .sendFeedback(sessionId, messageId, 'patient', el.dataset.signal as 'positive' | 'negative')
        .catch(() => undefined);
    }
  });

  window.addEventListener('hashchange', () => {
    paint();
    if (currentRoute() === 'dashboard') {
      void refreshDashboard();
    }
  });

  startAlertPolling(
    client,
    () => dash.feed,
    (feed) => {
      dash = { ...dash, feed };
      paint();
    },
  );

  try {
    chatModel = chat.sessionOpened(chatModel, await client.openSession(patientId));
  } catch {
    chatModel = { ...chatModel, offline: true };
  }
  paint();
  void refreshDashboard();
}

void boot();
