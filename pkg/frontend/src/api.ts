/**
 * Typed client for the dialogue service. Every request the UI makes goes
 * through this class, and each method logs the endpoint template it hit,
 * so the contract tests can check the UI against the documented API.
 */

export interface PathEdge {
  subject: string;
  predicate: string;
  object: string;
}

export interface EvidencePath {
  nodes: string[];
  edges: PathEdge[];
}

export interface AlertEvidence {
  message_id: string;
  phrase: string;
  score: number;
}

export type AlertLevel = 'clinician_flag' | 'emergency';

export interface Alert {
  alert_id: string;
  session_id: string;
  level: AlertLevel;
  triggering_node: string;
  evidence: AlertEvidence;
  created_at: string;
  acknowledged: boolean;
  seq: number;
}

export interface SurvivorValue {
  template_id: string;
  q: number;
}

export interface MaskedCandidate {
  template_id: string;
  violated: string;
}

export interface Selection {
  state: string;
  chosen: string;
  explored: boolean;
  survivors: SurvivorValue[];
  masked: MaskedCandidate[];
}

export interface BotMessage {
  message_id: string;
  in_reply_to: string;
  reply: string;
  action_type: string;
  explanation: EvidencePath[];
  alerts: Alert[];
}

export interface ExplanationTurn {
  message_id: string;
  in_reply_to: string;
  selection: Selection | null;
  explanation: EvidencePath[];
}

export type FeedbackSource = 'patient' | 'clinician';
export type FeedbackSignal = 'positive' | 'negative';

/** Error body the service returns on every non-2xx response. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ServiceError';
  }
}

/** The service's full endpoint list; the client must never call outside it. */
export const DOCUMENTED_ENDPOINTS: readonly string[] = [
  'POST /v1/notes',
  'POST /v1/sessions',
  'POST /v1/sessions/{id}/messages',
  'POST /v1/sessions/{id}/feedback',
  'GET /v1/alerts',
  'GET /v1/patients/{id}/graph',
  'GET /v1/sessions/{id}/explanations',
  'GET /v1/health',
];

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  /** Endpoint templates actually used, in call order. */
  readonly calls: string[] = [];

  constructor(
    readonly base: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(template: string, method: string, path: string, body?: unknown): Promise<Response> {
    this.calls.push(template);
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) {
      let code = 'error';
      let message = `HTTP ${res.status}`;
      try {
        const data = await res.json();
        code = data.code ?? code;
        message = data.message ?? message;
      } catch {
        // non-JSON error body, keep the fallback message
      }
      throw new ServiceError(res.status, code, message);
    }
    return res;
  }

  private async json<T>(template: string, method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.request(template, method, path, body);
    return (await res.json()) as T;
  }

  ingestNote(patientId: string, noteId: string, text: string): Promise<{ triples_added: number; warnings: string[] }> {
    return this.json('POST /v1/notes', 'POST', '/v1/notes', {
      patient_id: patientId,
      note_id: noteId,
      text,
    });
  }

  async openSession(patientId: string): Promise<string> {
    const data = await this.json<{ session_id: string }>('POST /v1/sessions', 'POST', '/v1/sessions', {
      patient_id: patientId,
    });
    return data.session_id;
  }

  sendMessage(sessionId: string, text: string): Promise<BotMessage> {
    return this.json(
      'POST /v1/sessions/{id}/messages',
      'POST',
      `/v1/sessions/${encodeURIComponent(sessionId)}/messages`,
      { text },
    );
  }

  async sendFeedback(
    sessionId: string,
    messageId: string,
    source: FeedbackSource,
    signal: FeedbackSignal,
  ): Promise<number> {
    const data = await this.json<{ q_after: number }>(
      'POST /v1/sessions/{id}/feedback',
      'POST',
      `/v1/sessions/${encodeURIComponent(sessionId)}/feedback`,
      { message_id: messageId, source, signal },
    );
    return data.q_after;
  }

  async alerts(sinceSeq: number): Promise<Alert[]> {
    const data = await this.json<{ alerts: Alert[] }>(
      'GET /v1/alerts',
      'GET',
      `/v1/alerts?since_seq=${sinceSeq}`,
    );
    return data.alerts;
  }

  async patientGraph(patientId: string): Promise<string> {
    const res = await this.request(
      'GET /v1/patients/{id}/graph',
      'GET',
      `/v1/patients/${encodeURIComponent(patientId)}/graph`,
    );
    return res.text();
  }

  async explanations(sessionId: string): Promise<ExplanationTurn[]> {
    const data = await this.json<{ explanations: ExplanationTurn[] }>(
      'GET /v1/sessions/{id}/explanations',
      'GET',
      `/v1/sessions/${encodeURIComponent(sessionId)}/explanations`,
    );
    return data.explanations;
  }

  health(): Promise<{ status: string; uptime_s: number }> {
    return this.json('GET /v1/health', 'GET', '/v1/health');
  }
}
