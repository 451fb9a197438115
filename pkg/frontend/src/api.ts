/**
 * Thin fetch client for the inventory/changes API.
 *
 * Every mutation the UI performs goes through exactly one documented
 * endpoint here; no business rule lives client-side.  The reviewer/owner
 * identity travels as the X-Principal header (dev-mode identity picker).
 */

import type {
  ApplicationRecord,
  ChangeEvent,
  Problem,
  RegistrationInput,
  Summary,
} from './types.js';

export class ApiError extends Error {
  readonly problem: Problem;
  readonly status: number;

  constructor(problem: Problem, status: number) {
    super(problem.message);
    this.problem = problem;
    this.status = status;
  }
}

export class ApiClient {
  principal = 'anonymous';

  constructor(private readonly baseUrl: string = '') {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: {
        'Content-Type': 'application/json',
        'X-Principal': this.principal,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let payload: unknown = null;
    if (text) {
      try {
        payload = JSON.parse(text);
      } catch {
        payload = null; // non-JSON body; handled below
      }
    }
    if (!response.ok) {
      const problem: Problem =
        payload !== null && typeof (payload as Problem).code === 'string'
          ? (payload as Problem)
          : { code: 'unexpected', message: text || response.statusText };
      throw new ApiError(problem, response.status);
    }
    return payload as T;
  }

  listApplications(): Promise<{ applications: ApplicationRecord[] }> {
    return this.request('GET', '/api/applications');
  }

  registerApplication(input: RegistrationInput): Promise<ApplicationRecord> {
    return this.request('POST', '/api/applications', input);
  }

  pendingChanges(): Promise<{ changes: ChangeEvent[] }> {
    return this.request('GET', '/api/changes?state=pending_review');
  }

  decide(
    eventId: number,
    verdict: 'approved' | 'rejected',
    comment: string,
  ): Promise<ChangeEvent> {
    return this.request('POST', `/api/changes/${eventId}/decision`, { verdict, comment });
  }

  summary(): Promise<Summary> {
    return this.request('GET', '/api/summary');
  }
}
