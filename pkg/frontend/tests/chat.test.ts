import { describe, expect, it } from 'vitest';

import type { BotMessage } from '../src/api.js';
import {
  backOnline,
  canGiveFeedback,
  canSend,
  editDraft,
  feedbackGiven,
  initialChat,
  replyArrived,
  sendFailed,
  sendStarted,
  sessionOpened,
  type ChatModel,
} from '../src/chat.js';

function reply(n: number, text = 'ok'): BotMessage {
  return {
    message_id: `s0001-m${String(n + 1).padStart(3, '0')}`,
    in_reply_to: `s0001-m${String(n).padStart(3, '0')}`,
    reply: text,
    action_type: 'smalltalk',
    explanation: [],
    alerts: [],
  };
}

function openedWithDraft(draft: string): ChatModel {
  return editDraft(sessionOpened(initialChat(), 's0001'), draft);
}

describe('send gating', () => {
  it('needs an open session, a non-empty draft, and no in-flight send', () => {
    expect(canSend(initialChat())).toBe(false);
    expect(canSend(editDraft(initialChat(), 'hello'))).toBe(false);
    expect(canSend(openedWithDraft(''))).toBe(false);
    expect(canSend(openedWithDraft('   '))).toBe(false);
    expect(canSend(openedWithDraft('hello'))).toBe(true);
  });

  it('one send in flight at a time', () => {
    let m = sendStarted(openedWithDraft('first'));
    expect(m.pending).toBe(true);
    m = editDraft(m, 'second');
    expect(canSend(m)).toBe(false);
    expect(sendStarted(m)).toBe(m); // no-op while pending
  });

  it('sendStarted is a no-op when gated', () => {
    const m = openedWithDraft('');
    expect(sendStarted(m)).toBe(m);
  });
});

describe('optimistic send and reconcile', () => {
  it('appends the patient turn immediately and fills its id from the reply', () => {
    let m = sendStarted(openedWithDraft('hi there'));
    expect(m.turns).toHaveLength(1);
    expect(m.turns[0]).toMatchObject({ role: 'patient', text: 'hi there', messageId: '' });

    m = replyArrived(m, reply(1, 'hello back'));
    expect(m.pending).toBe(false);
    expect(m.turns.map((t) => t.messageId)).toEqual(['s0001-m001', 's0001-m002']);
    expect(m.turns[1]).toMatchObject({ role: 'bot', text: 'hello back', feedbackUsed: false });
  });

  it('keeps the turn list ordered by message_id across several exchanges', () => {
    let m = openedWithDraft('one');
    m = replyArrived(sendStarted(m), reply(1));
    m = replyArrived(sendStarted(editDraft(m, 'two')), reply(3));
    m = replyArrived(sendStarted(editDraft(m, 'three')), reply(5));
    const ids = m.turns.map((t) => t.messageId);
    expect(ids).toEqual([...ids].sort());
    expect(ids).toHaveLength(6);
  });
});

describe('send failures', () => {
  it('network failure raises the offline banner and restores the draft', () => {
    let m = sendStarted(openedWithDraft('are you there'));
    m = sendFailed(m, 'offline', 'fetch failed');
    expect(m.offline).toBe(true);
    expect(m.pending).toBe(false);
    expect(m.draft).toBe('are you there');
    expect(m.turns).toHaveLength(0);
    expect(backOnline(m).offline).toBe(false);
  });

  it('a rejected send leaves an inline error bubble and no logged turn', () => {
    let m = sendStarted(openedWithDraft('bad payload'));
    m = sendFailed(m, 'rejected', 'message text must be a string');
    expect(m.offline).toBe(false);
    expect(m.turns).toHaveLength(1);
    expect(m.turns[0].role).toBe('error');
    expect(m.turns[0].messageId).toBe(''); // never entered the log
    expect(m.turns.filter((t) => t.role === 'patient')).toHaveLength(0);
  });
});

describe('feedback buttons', () => {
  it('allows exactly one feedback per bot message', () => {
    let m = replyArrived(sendStarted(openedWithDraft('hi')), reply(1));
    expect(canGiveFeedback(m, 's0001-m002')).toBe(true);
    m = feedbackGiven(m, 's0001-m002');
    expect(canGiveFeedback(m, 's0001-m002')).toBe(false);
    expect(feedbackGiven(m, 's0001-m002')).toBe(m); // second press is inert
  });

  it('never applies to patient turns or unknown ids', () => {
    const m = replyArrived(sendStarted(openedWithDraft('hi')), reply(1));
    expect(canGiveFeedback(m, 's0001-m001')).toBe(false);
    expect(canGiveFeedback(m, 'nope')).toBe(false);
    expect(feedbackGiven(m, 'nope')).toBe(m);
  });
});

describe('model invariants under random event sequences', () => {
  it('ids stay sorted, at most one optimistic turn, feedback stays used', () => {
    let seed = 0xdecafbad;
    const rand = () => {
      // xorshift32, deterministic across runs
      seed ^= seed << 13;
      seed ^= seed >>> 17;
      seed ^= seed << 5;
      return (seed >>> 0) / 0x100000000;
    };

    let m = sessionOpened(initialChat(), 's0001');
    let nextId = 1;
    const givenFeedback = new Set<string>();
    for (let step = 0; step < 500; step++) {
      const roll = rand();
      if (roll < 0.35) {
        m = sendStarted(editDraft(m, `msg ${step}`));
      } else if (roll < 0.6) {
        if (m.pending) {
          m = replyArrived(m, reply(nextId));
          nextId += 2;
        }
      } else if (roll < 0.75) {
        if (m.pending) {
          m = sendFailed(m, rand() < 0.5 ? 'offline' : 'rejected', 'failure');
        }
      } else {
        const bots = m.turns.filter((t) => t.role === 'bot');
        if (bots.length > 0) {
          const pick = bots[Math.floor(rand() * bots.length)].messageId;
          if (canGiveFeedback(m, pick)) {
            givenFeedback.add(pick);
          }
          m = feedbackGiven(m, pick);
        }
      }

      const logged = m.turns.filter((t) => t.messageId !== '').map((t) => t.messageId);
      expect(logged).toEqual([...logged].sort());
      expect(m.turns.filter((t) => t.messageId === '' && t.role === 'patient').length).toBeLessThanOrEqual(1);
      for (const id of givenFeedback) {
        expect(canGiveFeedback(m, id)).toBe(false);
      }
    }
  });
});
