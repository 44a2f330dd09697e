import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError, MutationInFlight, NetworkError } from '../src/api';

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

describe('ApiClient', () => {
  it('parses JSON bodies and sends one POST per action', async () => {
    const calls: Array<{ url: string; init?: RequestInit }> = [];
    const client = new ApiClient('http://svc', async (url, init) => {
      calls.push({ url, init });
      return jsonResponse({ session_id: 'abc', phase: 'PreSurvey', legal_events: [] });
    });
    const view = await client.startSession('stu-1');
    expect(view.session_id).toBe('abc');
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe('http://svc/sessions');
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ student_id: 'stu-1' });
  });

  it('maps error payloads to ApiError with status', async () => {
    const client = new ApiClient('http://svc', async () =>
      jsonResponse({ error: 'event GradeReceived is illegal in phase PreSurvey' }, 409),
    );
    await expect(client.checkPrompt('s')).rejects.toMatchObject({
      name: 'ApiError',
      status: 409,
    });
  });

  it('wraps transport failures in NetworkError', async () => {
    const client = new ApiClient('http://svc', async () => {
      throw new TypeError('fetch failed');
    });
    await expect(client.submitPrompt('s', 'draft')).rejects.toBeInstanceOf(NetworkError);
  });

  it('rejects a second concurrent mutation for the session', async () => {
    let release!: (value: Response) => void;
    const gate = new Promise<Response>((resolve) => {
      release = resolve;
    });
    const client = new ApiClient('http://svc', () => gate);
    const first = client.submitPrompt('s', 'one');
    await expect(client.submitPrompt('s', 'two')).rejects.toBeInstanceOf(MutationInFlight);
    release(jsonResponse({ phase: 'Practice', legal_events: [] }));
    await first;
    // released after completion
    expect(client.mutationInFlight).toBe(false);
  });

  it('clears the in-flight flag after a failure so the user can retry', async () => {
    let shouldFail = true;
    const client = new ApiClient('http://svc', async () => {
      if (shouldFail) throw new TypeError('offline');
      return jsonResponse({ phase: 'Practice', legal_events: [] });
    });
    await expect(client.submitPrompt('s', 'draft')).rejects.toBeInstanceOf(NetworkError);
    shouldFail = false;
    await expect(client.submitPrompt('s', 'draft')).resolves.toBeTruthy();
  });
});
