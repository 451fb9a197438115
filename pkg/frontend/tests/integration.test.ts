// @vitest-environment happy-dom
//
// End-to-end UI flows against a live service (spawned in globalSetup):
// registration round-trips server validation with inline errors, and the
// review queue mutates event state through the documented endpoints only.
import { beforeAll, beforeEach, describe, expect, inject, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { renderQueue } from '../src/views/queue.js';
import { renderRegistrationForm } from '../src/views/registration.js';
import type { ChangeEvent } from '../src/types.js';

const baseUrl = inject('baseUrl');

beforeAll(() => {
  // align the document origin with the live server so happy-dom's
  // same-origin policy lets the real requests through
  (window as unknown as { happyDOM: { setURL(url: string): void } }).happyDOM.setURL(
    baseUrl,
  );
});

let serial = 0;
function uniqueKey(prefix: string): string {
  serial += 1;
  return `${prefix}-${Date.now()}-${serial}`;
}

function workbookJson(formula: string): string {
  return JSON.stringify({
    name: 'monitored',
    sheets: [
      {
        name: 'Calc',
        protection_enabled: true,
        cells: {
          A1: { t: 'n', v: 2, locked: true },
          B1: { t: 'n', v: 4, f: formula, locked: true },
        },
      },
    ],
  });
}

async function seedPendingEvent(author = 'alice'): Promise<ChangeEvent> {
  const fileKey = uniqueKey('file');
  const registered = await fetch(`${baseUrl}/api/applications`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json', 'X-Principal': author },
    body: JSON.stringify({
      name: uniqueKey('Monitored model'),
      owner: author,
      category: 'financial',
      tier: 'critical',
      file_key: fileKey,
    }),
  });
  expect(registered.status).toBe(201);
  const recordId = (await registered.json()).record_id;

  const submit = (formula: string) =>
    fetch(`${baseUrl}/api/applications/${recordId}/snapshot`, {
      method: 'POST',
      headers: { 'X-Principal': author },
      body: workbookJson(formula),
    });
  const baseline = await submit('A1*2');
  expect(baseline.status).toBe(200);
  const changed = await submit('A1*3');
  expect(changed.status).toBe(200);
  const event = (await changed.json()).event as ChangeEvent;
  expect(event.state).toBe('pending_review');
  return event;
}

async function eventState(eventId: number): Promise<string> {
  const response = await fetch(`${baseUrl}/api/changes/${eventId}`);
  return (await response.json()).state;
}

async function waitForState(eventId: number, want: string): Promise<void> {
  const deadline = Date.now() + 5000;
  while ((await eventState(eventId)) !== want) {
    if (Date.now() > deadline) {
      throw new Error(`event ${eventId} never reached ${want}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}

async function waitFor(condition: () => boolean, timeoutMs = 5000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!condition()) {
    if (Date.now() > deadline) {
      throw new Error('condition not met in time');
    }
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}

function fillAndSubmit(form: HTMLFormElement, values: Record<string, string>): void {
  for (const [name, value] of Object.entries(values)) {
    const input = form.querySelector(`[name="${name}"]`) as HTMLInputElement | null;
    if (input) input.value = value;
  }
  form.dispatchEvent(new Event('submit', { cancelable: true }));
}

describe('registration against the live server', () => {
  let client: ApiClient;
  let root: HTMLElement;

  beforeEach(() => {
    client = new ApiClient(baseUrl);
    client.principal = 'owner-pat';
    root = document.createElement('div');
    document.body.append(root);
  });

  it('valid submission creates the record server-side', async () => {
    const registered = vi.fn();
    const form = renderRegistrationForm(root, client, registered);
    const name = uniqueKey('Fresh model');
    fillAndSubmit(form, { name, owner: 'pat' });
    await waitFor(() => registered.mock.calls.length === 1);

    expect(registered).toHaveBeenCalledTimes(1);
    const { applications } = await client.listApplications();
    const created = applications.find((a) => a.name === name);
    expect(created).toBeDefined();
    expect(created!.required_controls.change_monitoring).toBe(true);
  });

  it('missing owner comes back as an inline field error', async () => {
    const registered = vi.fn();
    const form = renderRegistrationForm(root, client, registered);
    fillAndSubmit(form, { name: uniqueKey('No owner'), owner: '' });
    await waitFor(
      () => (form.querySelector('[data-error-for="owner"]')?.textContent ?? '') !== '',
    );

    expect(registered).not.toHaveBeenCalled();
    expect(form.querySelector('[data-error-for="owner"]')?.textContent).toContain(
      'owner',
    );
  });

  it('duplicate file key surfaces on the file_key field', async () => {
    const fileKey = uniqueKey('shared');
    const firstDone = vi.fn();
    const first = renderRegistrationForm(root, client, firstDone);
    fillAndSubmit(first, { name: uniqueKey('First'), owner: 'pat', file_key: fileKey });
    await waitFor(() => firstDone.mock.calls.length === 1);

    const second = renderRegistrationForm(root, client, vi.fn());
    fillAndSubmit(second, { name: uniqueKey('Second'), owner: 'pat', file_key: fileKey });
    await waitFor(
      () => (second.querySelector('[data-error-for="file_key"]')?.textContent ?? '') !== '',
    );

    expect(second.querySelector('[data-error-for="file_key"]')?.textContent).toContain(
      fileKey,
    );
  });
});

describe('review queue against the live server', () => {
  it('approve mutates the event to approved and empties the row', async () => {
    const event = await seedPendingEvent('alice');
    const client = new ApiClient(baseUrl);
    client.principal = 'bob';
    const root = document.createElement('div');
    const refresh = vi.fn();
    renderQueue(root, [event], client, refresh);

    const comment = root.querySelector('.comment-input') as HTMLInputElement;
    comment.value = 'checked the formula change';
    (root.querySelector('button.approve') as HTMLButtonElement).click();
    await waitFor(() => refresh.mock.calls.length > 0);

    expect(refresh).toHaveBeenCalled();
    expect(await eventState(event.event_id)).toBe('approved');
  });

  it('reject with a comment mutates the event to rejected', async () => {
    const event = await seedPendingEvent('alice');
    const client = new ApiClient(baseUrl);
    client.principal = 'bob';
    const root = document.createElement('div');
    renderQueue(root, [event], client, vi.fn());

    (root.querySelector('.comment-input') as HTMLInputElement).value = 'wrong multiplier';
    (root.querySelector('button.reject') as HTMLButtonElement).click();
    await waitForState(event.event_id, 'rejected');

    expect(await eventState(event.event_id)).toBe('rejected');
  });

  it('reject without a comment shows the server error and leaves state unchanged', async () => {
    const event = await seedPendingEvent('alice');
    const client = new ApiClient(baseUrl);
    client.principal = 'bob';
    const root = document.createElement('div');
    const refresh = vi.fn();
    renderQueue(root, [event], client, refresh);

    (root.querySelector('button.reject') as HTMLButtonElement).click();
    await waitFor(
      () => (root.querySelector('.decision-error')?.textContent ?? '') !== '',
    );

    expect(root.querySelector('.decision-error')?.textContent).toContain('comment');
    expect(refresh).not.toHaveBeenCalled();
    expect(await eventState(event.event_id)).toBe('pending_review');
  });

  it('self-review is refused verbatim', async () => {
    const event = await seedPendingEvent('alice');
    const client = new ApiClient(baseUrl);
    client.principal = 'alice'; // the author
    const root = document.createElement('div');
    renderQueue(root, [event], client, vi.fn());

    (root.querySelector('button.approve') as HTMLButtonElement).click();
    await waitFor(
      () => (root.querySelector('.decision-error')?.textContent ?? '') !== '',
    );

    expect(root.querySelector('.decision-error')?.textContent).toContain('independent');
    expect(await eventState(event.event_id)).toBe('pending_review');
  });

  it('deciding an already-settled event refreshes the queue', async () => {
    const event = await seedPendingEvent('alice');
    // settle it out-of-band, as another reviewer would
    const settle = await fetch(`${baseUrl}/api/changes/${event.event_id}/decision`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json', 'X-Principal': 'carol' },
      body: JSON.stringify({ verdict: 'approved', comment: 'raced you' }),
    });
    expect(settle.status).toBe(200);

    const client = new ApiClient(baseUrl);
    client.principal = 'bob';
    const root = document.createElement('div');
    const refresh = vi.fn();
    renderQueue(root, [event], client, refresh);
    (root.querySelector('button.approve') as HTMLButtonElement).click();
    await waitFor(
      () => (root.querySelector('.decision-error')?.textContent ?? '') !== '',
    );

    expect(root.querySelector('.decision-error')?.textContent).toContain('pending_review');
    expect(refresh).toHaveBeenCalled();
  });
});
