/**
 * Patient chat view model. A plain object plus pure transition functions:
 * the DOM layer renders whatever the model says and feeds events back in.
 * Message ids are zero-padded per session, so ordering by message_id is
 * plain string order.
 */

import type { BotMessage, EvidencePath } from './api.js';

export type Role = 'patient' | 'bot' | 'error';

export interface Turn {
  /** Empty while an optimistic send is waiting for the service's id. */
  messageId: string;
  role: Role;
  text: string;
  actionType?: string;
  explanation?: EvidencePath[];
  feedbackUsed?: boolean;
}

export interface ChatModel {
  sessionId: string | null;
  draft: string;
  /** One in-flight send at a time. */
  pending: boolean;
  offline: boolean;
  turns: Turn[];
}

export function initialChat(): ChatModel {
  return { sessionId: null, draft: '', pending: false, offline: false, turns: [] };
}

export function sessionOpened(m: ChatModel, sessionId: string): ChatModel {
  return { ...m, sessionId };
}

export function editDraft(m: ChatModel, draft: string): ChatModel {
  return { ...m, draft };
}

/** Empty drafts, in-flight sends, and missing sessions all disable send. */
export function canSend(m: ChatModel): boolean {
  return m.sessionId !== null && !m.pending && m.draft.trim() !== '';
}

/** Optimistic append of the patient turn; the id arrives with the reply. */
export function sendStarted(m: ChatModel): ChatModel {
  if (!canSend(m)) {
    return m;
  }
  const turn: Turn = { messageId: '', role: 'patient', text: m.draft };
  return { ...m, draft: '', pending: true, turns: [...m.turns, turn] };
}

function byMessageId(turns: Turn[]): Turn[] {
  const logged = turns.filter((t) => t.messageId !== '');
  const waiting = turns.filter((t) => t.messageId === '');
  logged.sort((a, b) => (a.messageId < b.messageId ? -1 : a.messageId > b.messageId ? 1 : 0));
  return [...logged, ...waiting];
}

/** Reconcile the optimistic turn with the service's reply. */
export function replyArrived(m: ChatModel, out: BotMessage): ChatModel {
  const turns = m.turns.map((t) =>
    t.messageId === '' && t.role === 'patient' ? { ...t, messageId: out.in_reply_to } : t,
  );
  turns.push({
    messageId: out.message_id,
    role: 'bot',
    text: out.reply,
    actionType: out.action_type,
    explanation: out.explanation,
    feedbackUsed: false,
  });
  return { ...m, pending: false, offline: false, turns: byMessageId(turns) };
}

/**
 * A network failure keeps the utterance in the draft box and raises the
 * offline banner; a service rejection (422) drops the turn from the log and
 * leaves an inline error bubble instead.
 */
export function sendFailed(m: ChatModel, kind: 'offline' | 'rejected', detail: string): ChatModel {
  const optimistic = m.turns.find((t) => t.messageId === '' && t.role === 'patient');
  const turns = m.turns.filter((t) => t !== optimistic);
  if (kind === 'offline') {
    return { ...m, pending: false, offline: true, draft: optimistic?.text ?? m.draft, turns };
  }
  turns.push({ messageId: '', role: 'error', text: detail });
  return { ...m, pending: false, turns };
}

export function backOnline(m: ChatModel): ChatModel {
  return m.offline ? { ...m, offline: false } : m;
}

export function canGiveFeedback(m: ChatModel, messageId: string): boolean {
  const turn = m.turns.find((t) => t.messageId === messageId);
  return turn !== undefined && turn.role === 'bot' && turn.feedbackUsed === false;
}

/** Feedback is one-shot per bot message; the button stays disabled after. */
export function feedbackGiven(m: ChatModel, messageId: string): ChatModel {
  if (!canGiveFeedback(m, messageId)) {
    return m;
  }
  const turns = m.turns.map((t) => (t.messageId === messageId ? { ...t, feedbackUsed: true } : t));
  return { ...m, turns };
}
