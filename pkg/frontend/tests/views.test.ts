// @vitest-environment happy-dom
import { describe, expect, it, vi } from 'vitest';

import type { ApiClient } from '../src/api.js';
import { ApiError } from '../src/api.js';
import { controlBadges, renderApplicationList } from '../src/views/applications.js';
import { renderDashboard } from '../src/views/dashboard.js';
import { describeCell, renderQueue } from '../src/views/queue.js';
import { renderRegistrationForm } from '../src/views/registration.js';
import type { ApplicationRecord, ChangeEvent, Summary } from '../src/types.js';

const CONTROLS_ALL = {
  inventory_listed: true,
  design_standards: true,
  independent_validation: true,
  checking_controls: true,
  change_logs: true,
  change_monitoring: true,
  security: true,
  archiving: true,
};

function sampleRecord(overrides: Partial<ApplicationRecord> = {}): ApplicationRecord {
  return {
    record_id: 1,
    name: 'Margin model',
    owner: 'alice',
    line_manager: '',
    business_process: '',
    category: 'financial',
    tier: 'critical',
    file_key: null,
    last_validated_at: null,
    validation_frequency_days: 90,
    status: 'active',
    status_note: '',
    created_at: '2024-01-01T00:00:00Z',
    updated_at: '2024-01-01T00:00:00Z',
    required_controls: CONTROLS_ALL,
    validation_state: 'never_validated',
    compliance_score: null,
    ...overrides,
  };
}

function pendingEvent(overrides: Partial<ChangeEvent> = {}): ChangeEvent {
  return {
    event_id: 5,
    file_key: 'f1',
    from_snapshot: 1,
    to_snapshot: 2,
    changes: [
      {
        sheet: 'Calc',
        addr: 'D3',
        kind: 'formula_changed',
        before: { t: 'n', v: 900, f: 'B3*C3', locked: true },
        after: { t: 'n', v: 900, f: 'B3*C3*2', locked: true },
      },
    ],
    structural: false,
    author: 'alice',
    triggered_rules: ['formula_change_any'],
    state: 'pending_review',
    recorded_at: '2024-01-02T00:00:00Z',
    decision: null,
    ...overrides,
  };
}

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe('application list', () => {
  it('renders control badges from the server-derived set', () => {
    const badges = controlBadges({ ...CONTROLS_ALL, change_monitoring: false });
    expect(badges).toHaveLength(7);
    expect(badges).not.toContain('monitoring');
  });

  it('shows a validation chip per record', () => {
    const root = document.createElement('div');
    renderApplicationList(root, [sampleRecord({ validation_state: 'overdue' })]);
    expect(root.querySelector('.chip-overdue')?.textContent).toBe('overdue');
  });
});

describe('registration form', () => {
  it('submits the form and reports the new record', async () => {
    const record = sampleRecord();
    const client = {
      registerApplication: vi.fn(async () => record),
    } as unknown as ApiClient;
    const root = document.createElement('div');
    const registered = vi.fn();
    const form = renderRegistrationForm(root, client, registered);

    (form.querySelector('[name="name"]') as HTMLInputElement).value = 'Margin model';
    (form.querySelector('[name="owner"]') as HTMLInputElement).value = 'alice';
    form.dispatchEvent(new Event('submit', { cancelable: true }));
    await flush();

    expect(client.registerApplication).toHaveBeenCalledWith(
      expect.objectContaining({ name: 'Margin model', owner: 'alice' }),
    );
    expect(registered).toHaveBeenCalledWith(record);
  });

  it('renders a field-scoped problem inline', async () => {
    const client = {
      registerApplication: vi.fn(async () => {
        throw new ApiError(
          { code: 'validation-error', message: 'owner is required', field: 'owner' },
          400,
        );
      }),
    } as unknown as ApiClient;
    const root = document.createElement('div');
    const form = renderRegistrationForm(root, client, vi.fn());
    form.dispatchEvent(new Event('submit', { cancelable: true }));
    await flush();

    expect(form.querySelector('[data-error-for="owner"]')?.textContent).toBe(
      'owner is required',
    );
    expect(form.querySelector('.form-error')?.textContent).toBe('');
  });

  it('renders duplicate-file-key as a form-level error', async () => {
    const client = {
      registerApplication: vi.fn(async () => {
        throw new ApiError(
          { code: 'duplicate-file-key', message: 'file_key already in use', field: 'file_key' },
          409,
        );
      }),
    } as unknown as ApiClient;
    const root = document.createElement('div');
    const form = renderRegistrationForm(root, client, vi.fn());
    form.dispatchEvent(new Event('submit', { cancelable: true }));
    await flush();

    // the problem carries a field, so it lands inline at file_key
    expect(form.querySelector('[data-error-for="file_key"]')?.textContent).toBe(
      'file_key already in use',
    );
  });
});

describe('review queue', () => {
  it('renders before/after formula and value per cell change', () => {
    const root = document.createElement('div');
    renderQueue(root, [pendingEvent()], {} as ApiClient, vi.fn());
    const row = root.querySelector('.diff-formula_changed');
    expect(row?.textContent).toContain('Calc!D3');
    expect(row?.textContent).toContain('=B3*C3');
    expect(row?.textContent).toContain('=B3*C3*2');
  });

  it('describes absent and blank cells distinctly', () => {
    expect(describeCell(null)).toEqual({ formula: '—', value: '(absent)' });
    expect(describeCell({ t: 'blank', locked: true, f: 'A1' })).toEqual({
      formula: '=A1',
      value: '(blank)',
    });
  });

  it('approve posts the decision and refreshes', async () => {
    const decide = vi.fn(async () => pendingEvent({ state: 'approved' }));
    const refresh = vi.fn();
    const root = document.createElement('div');
    renderQueue(root, [pendingEvent()], { decide } as unknown as ApiClient, refresh);
    (root.querySelector('button.approve') as HTMLButtonElement).click();
    await flush();
    expect(decide).toHaveBeenCalledWith(5, 'approved', '');
    expect(refresh).toHaveBeenCalled();
  });

  it('shows server errors verbatim and keeps the card', async () => {
    const decide = vi.fn(async () => {
      throw new ApiError(
        { code: 'missing-comment', message: 'rejections must carry a remediation comment' },
        400,
      );
    });
    const refresh = vi.fn();
    const root = document.createElement('div');
    renderQueue(root, [pendingEvent()], { decide } as unknown as ApiClient, refresh);
    (root.querySelector('button.reject') as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector('.decision-error')?.textContent).toBe(
      'rejections must carry a remediation comment',
    );
    expect(refresh).not.toHaveBeenCalled();
  });

  it('refreshes on not-pending so a settled row disappears', async () => {
    const decide = vi.fn(async () => {
      throw new ApiError({ code: 'not-pending', message: 'event 5 is approved' }, 409);
    });
    const refresh = vi.fn();
    const root = document.createElement('div');
    renderQueue(root, [pendingEvent()], { decide } as unknown as ApiClient, refresh);
    (root.querySelector('button.approve') as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector('.decision-error')?.textContent).toBe('event 5 is approved');
    expect(refresh).toHaveBeenCalled();
  });
});

describe('dashboard', () => {
  it('renders category totals and validation histogram', () => {
    const summary: Summary = {
      schema_version: 1,
      total_records: 900,
      active_by_category: { financial: 700, operational: 200 },
      counts: {
        financial: {
          critical: { active: 233, retired: 0, replaced: 0 },
          significant: { active: 234, retired: 0, replaced: 0 },
          standard: { active: 233, retired: 0, replaced: 0 },
        },
        operational: {
          critical: { active: 66, retired: 0, replaced: 0 },
          significant: { active: 67, retired: 0, replaced: 0 },
          standard: { active: 67, retired: 0, replaced: 0 },
        },
      },
      validation_states: { never_validated: 900, due: 0, overdue: 0, current: 0 },
      latest_scores: {},
    };
    const root = document.createElement('div');
    renderDashboard(root, summary);
    expect(root.querySelector('[data-count="financial"]')?.textContent).toBe('700');
    expect(root.querySelector('[data-count="operational"]')?.textContent).toBe('200');
    expect(root.querySelector('[data-state="never_validated"]')?.textContent).toContain('900');
  });
});
