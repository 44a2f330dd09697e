// Typed client for the practice service. One method per user action; at
// most one mutating request is in flight per session at any time.

import type {
  AssessmentPayload,
  LikertAnswers,
  ScenariosPayload,
  SessionView,
  SurveyPayload,
  TestAnswers,
  TextAnswers,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

/** Network-level failure (server unreachable, request aborted). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${cause instanceof Error ? cause.message : String(cause)}`);
    this.name = 'NetworkError';
  }
}

export class MutationInFlight extends Error {
  constructor() {
    super('another request for this session is still in flight');
    this.name = 'MutationInFlight';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private mutationPending = false;

  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  get mutationInFlight(): boolean {
    return this.mutationPending;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON error body; fall through with null
    }
    if (!response.ok) {
      const detail =
        body && typeof body === 'object' && 'error' in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>(path);
  }

  /** POST with the single-in-flight-mutation guard. */
  private async mutate<T>(path: string, payload: unknown): Promise<T> {
    if (this.mutationPending) {
      throw new MutationInFlight();
    }
    this.mutationPending = true;
    try {
      return await this.request<T>(path, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(payload),
      });
    } finally {
      this.mutationPending = false;
    }
  }

  scenarios(): Promise<ScenariosPayload> {
    return this.get('/scenarios');
  }

  assessment(): Promise<AssessmentPayload> {
    return this.get('/assessment');
  }

  survey(): Promise<SurveyPayload> {
    return this.get('/survey');
  }

  session(sessionId: string): Promise<SessionView> {
    return this.get(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  startSession(studentId: string): Promise<SessionView> {
    return this.mutate('/sessions', { student_id: studentId });
  }

  submitSurvey(sessionId: string, survey: 'pre' | 'post', answers: LikertAnswers): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/survey`, { survey, answers });
  }

  submitTest(sessionId: string, answers: TestAnswers): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/test`, { answers });
  }

  answerWarmup(sessionId: string, itemId: string, answer: unknown): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/warmup`, { item_id: itemId, answer });
  }

  submitPrompt(sessionId: string, text: string): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/prompt`, { text });
  }

  checkPrompt(sessionId: string): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/check`, {});
  }

  advance(sessionId: string, action: 'retry' | 'next'): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/advance`, { action });
  }

  submitReflection(sessionId: string, answers: TextAnswers): Promise<SessionView> {
    return this.mutate(`/sessions/${sessionId}/reflection`, { answers });
  }
}
