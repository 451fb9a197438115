import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';

function mockFetch(status: number, body: unknown): typeof fetch {
  return vi.fn(async () =>
    new Response(JSON.stringify(body), {
      status,
      headers: { 'Content-Type': 'application/json' },
    }),
  ) as unknown as typeof fetch;
}

describe('ApiClient', () => {
  afterEach(() => {
    vi.unstubAllGlobals();
  });

  it('sends the principal header on every request', async () => {
    const spy = mockFetch(200, { applications: [] });
    vi.stubGlobal('fetch', spy);
    const client = new ApiClient();
    client.principal = 'reviewer-jane';
    await client.listApplications();
    const [, init] = (spy as ReturnType<typeof vi.fn>).mock.calls[0];
    expect((init as RequestInit).headers).toMatchObject({ 'X-Principal': 'reviewer-jane' });
  });

  it('turns problem objects into ApiError', async () => {
    vi.stubGlobal(
      'fetch',
      mockFetch(400, { code: 'validation-error', message: 'owner is required', field: 'owner' }),
    );
    const client = new ApiClient();
    const error = await client
      .registerApplication({ name: '', owner: '', category: 'financial', tier: 'critical' })
      .catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.problem.field).toBe('owner');
    expect(error.status).toBe(400);
  });

  it('wraps non-problem failures', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(async () => new Response('boom', { status: 500 })) as unknown as typeof fetch,
    );
    const error = await new ApiClient().summary().catch((e) => e);
    expect(error).toBeInstanceOf(Error);
    expect((error as ApiError).problem.code).toBe('unexpected');
  });

  it('posts decisions to the documented endpoint', async () => {
    const spy = mockFetch(200, { event_id: 7, state: 'approved' });
    vi.stubGlobal('fetch', spy);
    await new ApiClient().decide(7, 'approved', 'fine');
    const [url, init] = (spy as ReturnType<typeof vi.fn>).mock.calls[0];
    expect(url).toBe('/api/changes/7/decision');
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      verdict: 'approved',
      comment: 'fine',
    });
  });
});
